//! Problem data: partition multisets, optimization instances, candidate
//! points, and objective/feasibility evaluation.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A multiset of integers to be split into two halves of equal sum.
///
/// Elements are kept as exact integers; all subset sums are computed in
/// 128-bit arithmetic so balance checks never go through floating point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionInstance {
    elements: Vec<i64>,
}

impl PartitionInstance {
    /// Creates an instance; the multiset must be nonempty.
    pub fn new(elements: Vec<i64>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::EmptyMultiset);
        }
        Ok(Self { elements })
    }

    /// Number of elements `m`.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    /// True when the multiset is empty (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// The elements in input order.
    pub fn elements(&self) -> &[i64] {
        &self.elements
    }

    /// Sum of all elements.
    pub fn total(&self) -> i128 {
        self.elements.iter().map(|&a| a as i128).sum()
    }

    /// Sum of the elements whose bit is set in `mask` (bit `i` = element `i`).
    pub fn masked_sum(&self, mask: u64) -> i128 {
        self.elements
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &a)| a as i128)
            .sum()
    }
}

/// Which optimization problem an instance represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    /// min ||x||_1 - tau ||x||_2 subject to Ax = b.
    Cp,
    /// min ||x||_1 - tau ||x||_2 subject to Ax = b, x >= 0.
    Ncp,
    /// min ||Ax - b||_2^2 + lambda (||x||_1 - ||x||_2).
    Up,
    /// min ||Ax - b||_2^2 + lambda (||x||_1 - ||x||_2) subject to x >= 0.
    Nup,
    /// min -||x||_2^2 subject to Ax = b, x >= 0 (the concave quadratic form
    /// of the partition problem; only ever built by the reduction).
    Pqp,
    /// User-supplied A, b with the penalized objective; nonnegativity is a
    /// per-instance flag.
    Generic,
}

impl ProblemKind {
    /// Kinds whose feasible set imposes Ax = b.
    pub fn is_equality_constrained(self) -> bool {
        matches!(self, ProblemKind::Cp | ProblemKind::Ncp | ProblemKind::Pqp)
    }

    /// Kinds built by the partition reduction (everything except Generic).
    pub fn is_reduction_kind(self) -> bool {
        !matches!(self, ProblemKind::Generic)
    }

    /// Canonical lowercase name, also used in instance files and on the CLI.
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Cp => "cp",
            ProblemKind::Ncp => "ncp",
            ProblemKind::Up => "up",
            ProblemKind::Nup => "nup",
            ProblemKind::Pqp => "pqp",
            ProblemKind::Generic => "generic",
        }
    }

    /// Parses a kind name (case-insensitive).
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cp" => Ok(ProblemKind::Cp),
            "ncp" => Ok(ProblemKind::Ncp),
            "up" => Ok(ProblemKind::Up),
            "nup" => Ok(ProblemKind::Nup),
            "pqp" => Ok(ProblemKind::Pqp),
            "generic" => Ok(ProblemKind::Generic),
            other => Err(Error::InvalidParams(format!("unknown kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A concrete optimization instance.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    kind: ProblemKind,
    a: Array2<f64>,
    b: Array1<f64>,
    tau: Option<f64>,
    lambda: Option<f64>,
    nonneg: bool,
    source: Option<PartitionInstance>,
    param_out_of_range: bool,
}

impl ProblemInstance {
    /// Builds a `Generic` instance from explicit data. The objective is the
    /// penalized one: `||Ax-b||^2 + lambda (||x||_1 - ||x||_2)`, optionally
    /// restricted to `x >= 0`.
    pub fn generic(a: Array2<f64>, b: Array1<f64>, lambda: f64, nonneg: bool) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "A has {} rows but b has {} entries",
                a.nrows(),
                b.len()
            )));
        }
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::DimensionMismatch("A must be nonempty".into()));
        }
        if a.iter().any(|v| !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("instance data"));
        }
        if lambda < 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidParams(format!(
                "lambda must be a finite nonnegative number, got {lambda}"
            )));
        }
        let flagged = !(lambda > 0.0 && lambda < 2.0);
        Ok(Self {
            kind: ProblemKind::Generic,
            a,
            b,
            tau: None,
            lambda: Some(lambda),
            nonneg,
            source: None,
            param_out_of_range: flagged,
        })
    }

    pub(crate) fn from_reduction(
        kind: ProblemKind,
        a: Array2<f64>,
        b: Array1<f64>,
        tau: Option<f64>,
        lambda: Option<f64>,
        nonneg: bool,
        source: PartitionInstance,
        param_out_of_range: bool,
    ) -> Self {
        Self {
            kind,
            a,
            b,
            tau,
            lambda,
            nonneg,
            source: Some(source),
            param_out_of_range,
        }
    }

    /// Problem kind.
    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    /// Constraint/design matrix.
    pub fn a(&self) -> &Array2<f64> {
        &self.a
    }

    /// Right-hand side.
    pub fn b(&self) -> &Array1<f64> {
        &self.b
    }

    /// Variable dimension (number of columns of A).
    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    /// `tau` for the constrained kinds.
    pub fn tau(&self) -> Option<f64> {
        self.tau
    }

    /// `lambda` for the penalized kinds.
    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    /// Whether the feasible set includes `x >= 0`.
    pub fn nonneg(&self) -> bool {
        self.nonneg
    }

    /// The partition multiset this instance was built from, if any.
    pub fn source(&self) -> Option<&PartitionInstance> {
        self.source.as_ref()
    }

    /// True when the regularization parameter lies outside the range for
    /// which the closed-form analysis is proved (tau in [1/sqrt(2), sqrt(2))
    /// for CP, lambda in (0, 2) for the penalized kinds). Such instances are
    /// still evaluated and solved, but decisions based on them carry no
    /// guarantee.
    pub fn param_out_of_range(&self) -> bool {
        self.param_out_of_range
    }
}

/// A finite point in the variable space of some instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePoint {
    x: Vec<f64>,
}

impl CandidatePoint {
    /// Wraps coordinates, rejecting NaN and infinities.
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("candidate point"));
        }
        Ok(Self { x })
    }

    /// Builds a point from stacked halves `(u, v)`.
    pub fn from_uv(u: &[f64], v: &[f64]) -> Result<Self> {
        let mut x = Vec::with_capacity(u.len() + v.len());
        x.extend_from_slice(u);
        x.extend_from_slice(v);
        Self::new(x)
    }

    /// Coordinates as a slice.
    pub fn coords(&self) -> &[f64] {
        &self.x
    }

    /// Coordinates as an ndarray view.
    pub fn view(&self) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.x)
    }

    /// Dimension.
    pub fn len(&self) -> usize {
        self.x.len()
    }

    /// True for the zero-dimensional point (never for valid instances).
    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Objective value plus constraint residuals at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    /// Instance objective at the point.
    pub objective: f64,
    /// `max_i |(Ax - b)_i|` for equality-constrained kinds, `0` otherwise.
    pub equality_residual: f64,
    /// `max(0, -min_i x_i)` for nonnegative kinds, `0` otherwise.
    pub nonneg_violation: f64,
}

fn check_dims(inst: &ProblemInstance, p: &CandidatePoint) -> Result<()> {
    if p.len() != inst.dim() {
        return Err(Error::DimensionMismatch(format!(
            "point has {} coordinates, instance expects {}",
            p.len(),
            inst.dim()
        )));
    }
    Ok(())
}

/// L1 norm.
pub fn norm_l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// Euclidean norm.
pub fn norm_l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Evaluates the instance objective at `p`.
///
/// * CP/NCP: `||x||_1 - tau ||x||_2` (constraints ignored here);
/// * UP/NUP/Generic: `||Ax - b||_2^2 + lambda (||x||_1 - ||x||_2)`;
/// * PQP: `-||x||_2^2`.
pub fn eval_objective(inst: &ProblemInstance, p: &CandidatePoint) -> Result<f64> {
    check_dims(inst, p)?;
    let x = p.coords();
    match inst.kind() {
        ProblemKind::Cp | ProblemKind::Ncp => {
            let tau = inst.tau().expect("constrained kind carries tau");
            Ok(norm_l1(x) - tau * norm_l2(x))
        }
        ProblemKind::Up | ProblemKind::Nup | ProblemKind::Generic => {
            let lambda = inst.lambda().expect("penalized kind carries lambda");
            let r = inst.a().dot(&p.view()) - inst.b();
            Ok(r.dot(&r) + lambda * (norm_l1(x) - norm_l2(x)))
        }
        ProblemKind::Pqp => Ok(-x.iter().map(|v| v * v).sum::<f64>()),
    }
}

/// Evaluates objective and constraint residuals at `p`.
pub fn eval_feasibility(inst: &ProblemInstance, p: &CandidatePoint) -> Result<EvaluationResult> {
    let objective = eval_objective(inst, p)?;
    let equality_residual = if inst.kind().is_equality_constrained() {
        let r = inst.a().dot(&p.view()) - inst.b();
        r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    } else {
        0.0
    };
    let nonneg_violation = if inst.nonneg() {
        p.coords().iter().fold(0.0f64, |acc, &v| acc.max(-v)).max(0.0)
    } else {
        0.0
    };
    Ok(EvaluationResult {
        objective,
        equality_residual,
        nonneg_violation,
    })
}

/// Splits a `2m`-dimensional point into its `(u, v)` halves.
pub fn split_uv(p: &CandidatePoint, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if p.len() != 2 * m {
        return Err(Error::DimensionMismatch(format!(
            "point has {} coordinates, expected 2m = {}",
            p.len(),
            2 * m
        )));
    }
    Ok((p.coords()[..m].to_vec(), p.coords()[m..].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::{build_instance, ReductionParams};
    use approx::assert_abs_diff_eq;

    fn part(e: &[i64]) -> PartitionInstance {
        PartitionInstance::new(e.to_vec()).unwrap()
    }

    #[test]
    fn empty_multiset_rejected() {
        assert!(matches!(
            PartitionInstance::new(vec![]),
            Err(Error::EmptyMultiset)
        ));
    }

    #[test]
    fn masked_sums_are_exact() {
        let s = part(&[i64::MAX, i64::MAX, 1]);
        assert_eq!(s.masked_sum(0b011), 2 * (i64::MAX as i128));
        assert_eq!(s.total(), 2 * (i64::MAX as i128) + 1);
    }

    #[test]
    fn up_objective_at_zero_is_norm_b_squared() {
        let inst = build_instance(&part(&[1, 1]), &ReductionParams::up(1.0).unwrap()).unwrap();
        let zero = CandidatePoint::new(vec![0.0; 4]).unwrap();
        assert_eq!(eval_objective(&inst, &zero).unwrap(), 2.0);
    }

    #[test]
    fn up_objective_at_balanced_pattern() {
        // m = 2, lambda = 1: magnitude (1/sqrt(2)+1)/2, balanced split of {1,1}.
        let inst = build_instance(&part(&[1, 1]), &ReductionParams::up(1.0).unwrap()).unwrap();
        let c = 0.8535533905932737;
        let p = CandidatePoint::new(vec![c, 0.0, 0.0, c]).unwrap();
        assert_abs_diff_eq!(
            eval_objective(&inst, &p).unwrap(),
            0.5428932188134524,
            epsilon = 1e-14
        );
    }

    #[test]
    fn cp_objective_is_l1_minus_tau_l2() {
        let inst = build_instance(&part(&[1, 1]), &ReductionParams::cp(1.0).unwrap()).unwrap();
        let p = CandidatePoint::new(vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(
            eval_objective(&inst, &p).unwrap(),
            2.0 - std::f64::consts::SQRT_2,
            epsilon = 1e-15
        );
    }

    #[test]
    fn pqp_objective_is_negative_sum_of_squares() {
        let inst = build_instance(&part(&[1, 2]), &ReductionParams::pqp()).unwrap();
        let p = CandidatePoint::new(vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(eval_objective(&inst, &p).unwrap(), -2.0);
        let half = CandidatePoint::new(vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        assert_eq!(eval_objective(&inst, &half).unwrap(), -1.0);
    }

    #[test]
    fn feasibility_reports_infinity_norm_residual() {
        let inst = build_instance(&part(&[1, 2]), &ReductionParams::ncp(1.0).unwrap()).unwrap();
        let p = CandidatePoint::new(vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let ev = eval_feasibility(&inst, &p).unwrap();
        assert_eq!(ev.equality_residual, 3.0);
        assert_eq!(ev.nonneg_violation, 0.0);
    }

    #[test]
    fn feasibility_reports_nonneg_violation() {
        let inst = build_instance(&part(&[1, 2]), &ReductionParams::ncp(1.0).unwrap()).unwrap();
        let p = CandidatePoint::new(vec![1.0, 1.0, -0.25, 0.0]).unwrap();
        let ev = eval_feasibility(&inst, &p).unwrap();
        assert_eq!(ev.nonneg_violation, 0.25);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let inst = build_instance(&part(&[1, 2]), &ReductionParams::up(1.0).unwrap()).unwrap();
        let p = CandidatePoint::new(vec![0.0; 3]).unwrap();
        assert!(matches!(
            eval_objective(&inst, &p),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn non_finite_points_rejected_at_construction() {
        assert!(matches!(
            CandidatePoint::new(vec![0.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            CandidatePoint::new(vec![f64::INFINITY]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn split_uv_roundtrip_and_odd_length() {
        let p = CandidatePoint::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (u, v) = split_uv(&p, 2).unwrap();
        assert_eq!(u, vec![1.0, 2.0]);
        assert_eq!(v, vec![3.0, 4.0]);
        assert_eq!(CandidatePoint::from_uv(&u, &v).unwrap(), p);
        assert!(split_uv(&p, 3).is_err());
    }

    #[test]
    fn generic_instances_validate_shapes() {
        use ndarray::array;
        assert!(ProblemInstance::generic(array![[1.0, 2.0]], array![1.0, 2.0], 1.0, false).is_err());
        let inst = ProblemInstance::generic(array![[1.0, 2.0]], array![1.0], 1.0, true).unwrap();
        assert_eq!(inst.dim(), 2);
        assert!(inst.nonneg());
        assert!(!inst.param_out_of_range());
        let flagged = ProblemInstance::generic(array![[1.0]], array![1.0], 2.5, false).unwrap();
        assert!(flagged.param_out_of_range());
    }
}
