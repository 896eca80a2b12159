//! Independent checkers used to validate the closed-form claims numerically.
//!
//! Everything here is deliberately dumb: exhaustive subset enumeration in
//! integer arithmetic, dense grid scans, finite differences, and rejection of
//! any shortcut through the solver code paths. Oracle output is what the
//! tests trust; the analytic formulas and the solvers both answer to it.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{
    eval_objective, CandidatePoint, PartitionInstance, ProblemInstance, ProblemKind,
};
use crate::reduction::{closed_form_targets, PartitionCertificate, ReductionParams};
use crate::{Error, Result};

/// Hard cap for subset brute force (2^30 masks).
const BRUTE_FORCE_CAP: u32 = 30;
/// Hard cap for pattern enumeration (2^24 masks).
const PATTERN_CAP: u32 = 24;
/// At most this many tied argmin masks are materialized; the count stays exact.
const ARGMIN_KEEP: usize = 1 << 16;

/// Exhaustive subset-sum search. Returns the first balanced split in
/// ascending-mask order (element `i` = bit `i`), or `None` if no split
/// balances. Exact in both directions; refuses `m > 30`.
pub fn brute_force_partition(s: &PartitionInstance) -> Result<Option<PartitionCertificate>> {
    let m = s.len() as u32;
    if m > BRUTE_FORCE_CAP {
        return Err(Error::CapExceeded(format!(
            "brute force over m = {m} exceeds cap {BRUTE_FORCE_CAP}"
        )));
    }
    let total = s.total();
    let elems = s.elements();
    let mut sum1: i128 = 0;
    let end: u64 = 1u64 << m;
    for mask in 0..end {
        if mask > 0 {
            let mut changed = (mask - 1) ^ mask;
            while changed != 0 {
                let bit = changed.trailing_zeros() as usize;
                if mask >> bit & 1 == 1 {
                    sum1 += elems[bit] as i128;
                } else {
                    sum1 -= elems[bit] as i128;
                }
                changed &= changed - 1;
            }
        }
        if 2 * sum1 == total {
            return Ok(Some(PartitionCertificate::from_mask(s, mask)));
        }
    }
    Ok(None)
}

/// Objective of the concave quadratic partition program at `(u, v)`:
/// `sum_i (-u_i^2 - v_i^2)`. Constraints are not checked here.
pub fn eval_partition_qp(s: &PartitionInstance, u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != s.len() || v.len() != s.len() {
        return Err(Error::DimensionMismatch(format!(
            "u, v must each have {} entries, got {} and {}",
            s.len(),
            u.len(),
            v.len()
        )));
    }
    Ok(-(u.iter().map(|x| x * x).sum::<f64>() + v.iter().map(|x| x * x).sum::<f64>()))
}

/// Minimum of the instance objective over the optimal pattern set, together
/// with every attaining assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternMinimum {
    /// Minimum objective over admissible patterns; `+inf` when an
    /// equality-constrained kind has no balanced (hence no feasible) pattern.
    pub value: f64,
    /// Whether any admissible pattern exists (always true for UP/NUP).
    pub feasible: bool,
    /// Exact minimum of `|sum_1 - sum_2|` over all `2^m` assignments.
    pub min_imbalance: i128,
    /// Attaining assignments in ascending-mask order, truncated to a fixed
    /// keep limit for degenerate instances; `argmin_count` stays exact.
    pub argmin_masks: Vec<u64>,
    /// Exact number of attaining assignments.
    pub argmin_count: u64,
    m: usize,
    magnitude: f64,
}

impl PatternMinimum {
    /// True when some assignment balances exactly.
    pub fn balanced_exists(&self) -> bool {
        self.min_imbalance == 0
    }

    /// First balanced mask in ascending order, when one exists.
    pub fn first_balanced_mask(&self) -> Option<u64> {
        if self.balanced_exists() {
            self.argmin_masks.first().copied()
        } else {
            None
        }
    }

    /// Materializes the attaining pattern points.
    pub fn argmin_points(&self) -> Vec<CandidatePoint> {
        self.argmin_masks
            .iter()
            .map(|&mask| pattern_point(self.m, self.magnitude, mask))
            .collect()
    }
}

/// Builds the pattern point for `mask`: `(u_i, v_i) = (c, 0)` when bit `i`
/// is set, `(0, c)` otherwise.
pub fn pattern_point(m: usize, magnitude: f64, mask: u64) -> CandidatePoint {
    let mut x = vec![0.0; 2 * m];
    for i in 0..m {
        if mask >> i & 1 == 1 {
            x[i] = magnitude;
        } else {
            x[m + i] = magnitude;
        }
    }
    CandidatePoint::new(x).expect("pattern points are finite")
}

/// Enumerates all `2^m` optimal-pattern points of a reduction instance and
/// minimizes the instance objective over them.
///
/// The driving quantity per assignment is the exact integer imbalance
/// `d = sum_1 - sum_2`. For the penalized kinds the objective at a pattern
/// is `m(c-1)^2 + lambda(mc - c sqrt(m)) + (c d)^2`, strictly increasing in
/// `d^2`, so minimization and tie detection happen on integers. For the
/// equality-constrained kinds only `d = 0` patterns are feasible and they
/// all share one value. Refuses `m > 24`.
pub fn enumerate_pattern_minimum(inst: &ProblemInstance) -> Result<PatternMinimum> {
    let s = inst.source().ok_or_else(|| {
        Error::UnsupportedKind("pattern enumeration needs a reduction-built instance".into())
    })?;
    let m = s.len();
    if m as u32 > PATTERN_CAP {
        return Err(Error::CapExceeded(format!(
            "pattern enumeration over m = {m} exceeds cap {PATTERN_CAP}"
        )));
    }
    let params = ReductionParams::for_kind(inst.kind(), inst.tau(), inst.lambda())?;
    let targets = closed_form_targets(m, &params)?;
    let c = targets.pattern_magnitude;

    let total = s.total();
    let elems = s.elements();
    let mut sum1: i128 = 0;
    let mut best_d2: Option<i128> = None;
    let mut argmin_masks: Vec<u64> = Vec::new();
    let mut argmin_count: u64 = 0;
    let end: u64 = 1u64 << m;
    for mask in 0..end {
        if mask > 0 {
            let mut changed = (mask - 1) ^ mask;
            while changed != 0 {
                let bit = changed.trailing_zeros() as usize;
                if mask >> bit & 1 == 1 {
                    sum1 += elems[bit] as i128;
                } else {
                    sum1 -= elems[bit] as i128;
                }
                changed &= changed - 1;
            }
        }
        let d = 2 * sum1 - total;
        let d2 = d * d;
        if best_d2.map_or(true, |b| d2 < b) {
            best_d2 = Some(d2);
            argmin_masks.clear();
            argmin_masks.push(mask);
            argmin_count = 1;
        } else if best_d2 == Some(d2) {
            argmin_count += 1;
            if argmin_masks.len() < ARGMIN_KEEP {
                argmin_masks.push(mask);
            }
        }
    }
    let best_d2 = best_d2.expect("m >= 1 implies at least one mask");
    let min_imbalance = exact_isqrt(best_d2).expect("d^2 is a perfect square");

    let mf = m as f64;
    match inst.kind() {
        ProblemKind::Up | ProblemKind::Nup => {
            let lambda = inst.lambda().expect("penalized kind carries lambda");
            let base = mf * (c - 1.0) * (c - 1.0) + lambda * (mf * c - c * mf.sqrt());
            let dmin = min_imbalance as f64;
            Ok(PatternMinimum {
                value: base + (c * dmin) * (c * dmin),
                feasible: true,
                min_imbalance,
                argmin_masks,
                argmin_count,
                m,
                magnitude: c,
            })
        }
        ProblemKind::Cp | ProblemKind::Ncp | ProblemKind::Pqp => {
            let feasible = min_imbalance == 0;
            let value = if !feasible {
                f64::INFINITY
            } else if inst.kind() == ProblemKind::Pqp {
                -mf
            } else {
                let tau = inst.tau().expect("constrained kind carries tau");
                mf - tau * mf.sqrt()
            };
            if !feasible {
                // argmins tracked min |d| patterns, which are infeasible here
                return Ok(PatternMinimum {
                    value,
                    feasible,
                    min_imbalance,
                    argmin_masks: Vec::new(),
                    argmin_count: 0,
                    m,
                    magnitude: c,
                });
            }
            Ok(PatternMinimum {
                value,
                feasible,
                min_imbalance,
                argmin_masks,
                argmin_count,
                m,
                magnitude: c,
            })
        }
        ProblemKind::Generic => unreachable!("generic instances carry no source"),
    }
}

fn exact_isqrt(n: i128) -> Option<i128> {
    if n < 0 {
        return None;
    }
    let mut r = (n as f64).sqrt() as i128;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    (r * r == n).then_some(r)
}

/// Reduced one-sided objective used in the uniqueness analysis of the
/// constrained nonnegative problem:
/// `g(w) = 2||w||_2^2 - tau * sqrt(m + 2||w||_2^2 + 2||w||_4^4)`, `len(w) <= m`.
pub fn eval_g_w(w: &[f64], tau: f64, m: usize) -> Result<f64> {
    check_gw_args(w, m)?;
    let s2: f64 = w.iter().map(|x| x * x).sum();
    let s4: f64 = w.iter().map(|x| x * x * x * x).sum();
    Ok(2.0 * s2 - tau * (m as f64 + 2.0 * s2 + 2.0 * s4).sqrt())
}

/// Gradient of [`eval_g_w`]:
/// `4 w_i - tau (4 w_i + 8 w_i^3) / (2 sqrt(m + 2||w||_2^2 + 2||w||_4^4))`.
pub fn grad_g_w(w: &[f64], tau: f64, m: usize) -> Result<Vec<f64>> {
    check_gw_args(w, m)?;
    let s2: f64 = w.iter().map(|x| x * x).sum();
    let s4: f64 = w.iter().map(|x| x * x * x * x).sum();
    let root = (m as f64 + 2.0 * s2 + 2.0 * s4).sqrt();
    Ok(w.iter()
        .map(|&x| 4.0 * x - tau * (4.0 * x + 8.0 * x * x * x) / (2.0 * root))
        .collect())
}

fn check_gw_args(w: &[f64], m: usize) -> Result<()> {
    if w.is_empty() || w.len() > m {
        return Err(Error::DimensionMismatch(format!(
            "w must have between 1 and m = {m} entries, got {}",
            w.len()
        )));
    }
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("w"));
    }
    Ok(())
}

/// A dense axis-aligned evaluation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Per-dimension lower corner.
    pub lower: Vec<f64>,
    /// Per-dimension upper corner.
    pub upper: Vec<f64>,
    /// Shared step size, strictly positive.
    pub step: f64,
    /// Refuse grids with more than this many points.
    pub max_points: u64,
}

impl GridSpec {
    /// Default point cap (10^8).
    pub const DEFAULT_MAX_POINTS: u64 = 100_000_000;

    /// Builds a grid spec, validating shape and step.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, step: f64) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::DimensionMismatch(
                "grid bounds must be nonempty and of equal length".into(),
            ));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidParams(format!("grid step must be positive, got {step}")));
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if !lo.is_finite() || !hi.is_finite() || hi < lo {
                return Err(Error::InvalidParams(format!(
                    "invalid grid range [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self {
            lower,
            upper,
            step,
            max_points: Self::DEFAULT_MAX_POINTS,
        })
    }

    /// Cube `[lo, hi]^dims`.
    pub fn cube(lo: f64, hi: f64, dims: usize, step: f64) -> Result<Self> {
        Self::new(vec![lo; dims], vec![hi; dims], step)
    }

    /// Overrides the point cap.
    pub fn with_max_points(mut self, cap: u64) -> Self {
        self.max_points = cap;
        self
    }

    /// Number of dimensions.
    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    /// Points along each axis.
    pub fn counts(&self) -> Vec<usize> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| ((hi - lo) / self.step + 1e-9).floor() as usize + 1)
            .collect()
    }

    /// Total number of grid points.
    pub fn total_points(&self) -> u128 {
        self.counts().iter().map(|&c| c as u128).product()
    }
}

/// Exhaustively minimizes `f` over the grid.
///
/// Scans in lexicographic order (first coordinate slowest) with strict
/// improvement, so among tied minimizers the lexicographically smallest grid
/// point is returned. Coordinates are always materialized as
/// `lower + i * step` to keep results independent of scan order.
pub fn grid_minimize<F: Fn(&[f64]) -> f64>(f: F, spec: &GridSpec) -> Result<(f64, Vec<f64>)> {
    let total = spec.total_points();
    if total > spec.max_points as u128 {
        return Err(Error::CapExceeded(format!(
            "grid has {} points, cap is {}",
            total, spec.max_points
        )));
    }
    let dims = spec.dims();
    let counts = spec.counts();
    let mut idx = vec![0usize; dims];
    let mut point: Vec<f64> = spec.lower.clone();
    let mut best_val = f64::INFINITY;
    let mut best_point = point.clone();
    loop {
        let val = f(&point);
        if val < best_val {
            best_val = val;
            best_point.copy_from_slice(&point);
        }
        // odometer: last dimension fastest
        let mut d = dims;
        loop {
            if d == 0 {
                return Ok((best_val, best_point));
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < counts[d] {
                point[d] = spec.lower[d] + idx[d] as f64 * spec.step;
                break;
            }
            idx[d] = 0;
            point[d] = spec.lower[d];
        }
    }
}

/// Central-difference gradient of `f` at `x` with half-width `h`.
pub fn finite_diff_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut buf = x.to_vec();
    (0..x.len())
        .map(|i| {
            let xi = x[i];
            buf[i] = xi + h;
            let fp = f(&buf);
            buf[i] = xi - h;
            let fm = f(&buf);
            buf[i] = xi;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Outcome of the reduced-objective stationarity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    /// Grid argmin.
    pub point: Vec<f64>,
    /// Grid minimum value.
    pub objective: f64,
    /// Largest final gradient norm over all descent runs.
    pub gradient_norm: f64,
    /// True when the grid argmin is the grid point nearest the origin and
    /// every descent run ended within 1e-6 of the origin.
    pub converged_to_origin: bool,
}

/// Verifies that the reduced objective `g(w)` has its only minimizer at the
/// origin: (a) a dense grid scan attains its minimum at the grid point
/// nearest 0, and (b) `n_starts` backtracking gradient descents from random
/// points in the box all end within `1e-6` of the origin.
pub fn check_gw_unique_minimizer(
    tau: f64,
    m: usize,
    k: usize,
    spec: &GridSpec,
    n_starts: usize,
    seed: u64,
) -> Result<StationarityReport> {
    if k == 0 || k > m {
        return Err(Error::InvalidParams(format!(
            "need 1 <= k <= m, got k = {k}, m = {m}"
        )));
    }
    if spec.dims() != k {
        return Err(Error::DimensionMismatch(format!(
            "grid has {} dims, expected k = {k}",
            spec.dims()
        )));
    }
    let (objective, point) = grid_minimize(|w| eval_g_w(w, tau, m).unwrap(), spec)?;
    // the grid point nearest the origin, materialized the same way the scan does
    let nearest: Vec<f64> = spec
        .lower
        .iter()
        .zip(spec.counts())
        .map(|(&lo, count)| {
            let i = ((-lo / spec.step).round().max(0.0) as usize).min(count - 1);
            lo + i as f64 * spec.step
        })
        .collect();
    let grid_ok = point == nearest;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_grad: f64 = 0.0;
    let mut descents_ok = true;
    for _ in 0..n_starts {
        let mut w: Vec<f64> = (0..k)
            .map(|d| rng.gen_range(spec.lower[d]..=spec.upper[d]))
            .collect();
        let mut fw = eval_g_w(&w, tau, m)?;
        for _ in 0..500 {
            let g = grad_g_w(&w, tau, m)?;
            let g2: f64 = g.iter().map(|x| x * x).sum();
            if g2.sqrt() <= 1e-9 {
                break;
            }
            // Backtracking from unit step. The decrease constant must be
            // 1/2: the objective is locally quadratic with curvature 4 - 2
            // tau, so at tau = 1 a unit step maps w to -w almost exactly,
            // and a weak constant accepts that ping-pong forever.
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> =
                    w.iter().zip(&g).map(|(wi, gi)| wi - step * gi).collect();
                let ft = eval_g_w(&trial, tau, m)?;
                if ft <= fw - 0.5 * step * g2 {
                    w = trial;
                    fw = ft;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        // report the gradient at the endpoint itself; descent stalls once
        // objective differences drop below f64 resolution, around 1e-8 here
        let g = grad_g_w(&w, tau, m)?;
        let grad_norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        worst_grad = worst_grad.max(grad_norm);
        let dist: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if dist > 1e-6 {
            descents_ok = false;
        }
    }

    Ok(StationarityReport {
        point,
        objective,
        gradient_norm: worst_grad,
        converged_to_origin: grid_ok && descents_ok,
    })
}

/// Verifies the coercivity lower bound
/// `g(w) >= (2 - sqrt(2) tau) ||w||^2 - sqrt(m) tau - sqrt(2) tau ||w||`
/// at the origin (with equality) and at `samples` random points with
/// log-uniform radii in `[1e-3, 1e3]` and random dimension `k <= m`.
pub fn check_coercivity_bound(tau: f64, m: usize, samples: usize, seed: u64) -> Result<bool> {
    if m == 0 {
        return Err(Error::InvalidParams("m must be positive".into()));
    }
    let mf = m as f64;
    let rhs = |r: f64| (2.0 - std::f64::consts::SQRT_2 * tau) * r * r
        - mf.sqrt() * tau
        - std::f64::consts::SQRT_2 * tau * r;
    // equality at the origin
    let g0 = eval_g_w(&vec![0.0; m], tau, m)?;
    if (g0 - rhs(0.0)).abs() > 1e-12 {
        return Ok(false);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let k = rng.gen_range(1..=m);
        let radius = 10f64.powf(rng.gen_range(-3.0..=3.0));
        let mut w: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        for x in &mut w {
            *x *= radius / norm;
        }
        let g = eval_g_w(&w, tau, m)?;
        if g < rhs(radius) - 1e-9 * (1.0 + rhs(radius).abs()) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Diagonal restriction of the penalized nonnegative objective:
/// `h(t) = sum_i (t_i - 1)^2 + lambda (sum_i t_i - ||t||_2)`, `t >= 0`.
pub fn eval_h_t(t: &[f64], lambda: f64) -> Result<f64> {
    if t.is_empty() {
        return Err(Error::DimensionMismatch("t must be nonempty".into()));
    }
    if t.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("t"));
    }
    if t.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidParams("h(t) requires t >= 0".into()));
    }
    let sq: f64 = t.iter().map(|&x| (x - 1.0) * (x - 1.0)).sum();
    let sum: f64 = t.iter().sum();
    let norm: f64 = t.iter().map(|&x| x * x).sum::<f64>().sqrt();
    Ok(sq + lambda * (sum - norm))
}

/// Stationarity residual of the above at an interior candidate:
/// per coordinate `2(t_i - 1) + lambda - lambda t_i / ||t||_2` for `t_i > 0`;
/// coordinates at the boundary `t_i = 0` would need a nonnegative multiplier,
/// so their violation is folded in as `max(0, -(lambda - 2))`. Returns the
/// Euclidean norm of the stacked residual.
pub fn kkt_residual_nup(t: &[f64], lambda: f64) -> Result<f64> {
    if t.is_empty() {
        return Err(Error::DimensionMismatch("t must be nonempty".into()));
    }
    if t.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("t"));
    }
    if t.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidParams("residual requires t >= 0".into()));
    }
    let norm: f64 = t.iter().map(|&x| x * x).sum::<f64>().sqrt();
    let mut acc = 0.0;
    for &ti in t {
        let r = if ti > 0.0 {
            if norm == 0.0 {
                return Err(Error::Numerical("positive coordinate with zero norm".into()));
            }
            2.0 * (ti - 1.0) + lambda - lambda * ti / norm
        } else {
            // stationarity at 0 reads lambda - 2 = mu_i >= 0
            (-(lambda - 2.0)).max(0.0)
        };
        acc += r * r;
    }
    Ok(acc.sqrt())
}

/// Samples points with one oversized coordinate pair and confirms the
/// penalized objective strictly exceeds its value at the origin (`= m`).
///
/// The stratification follows the four proof cases around the box bound
/// `B = 1 + sqrt(m) + 2m/lambda` and the split level `2m/lambda`:
/// one of `|u_j|, |v_j|` is drawn above `B` while the partner is drawn
/// either below `2m/lambda` or above it. Remaining coordinates are uniform
/// in the box. Signs are random for UP; NUP samples stay nonnegative.
pub fn check_escape_box(inst: &ProblemInstance, samples: usize, seed: u64) -> Result<bool> {
    if !matches!(inst.kind(), ProblemKind::Up | ProblemKind::Nup) {
        return Err(Error::UnsupportedKind(
            "escape-box check applies to the penalized kinds".into(),
        ));
    }
    let s = inst
        .source()
        .ok_or_else(|| Error::UnsupportedKind("needs a reduction-built instance".into()))?;
    let m = s.len();
    let lambda = inst.lambda().expect("penalized kind carries lambda");
    if !(lambda > 0.0) {
        return Err(Error::InvalidParams("escape box needs lambda > 0".into()));
    }
    let mf = m as f64;
    let bound = 1.0 + mf.sqrt() + 2.0 * mf / lambda;
    let split = 2.0 * mf / lambda;
    let signed = inst.kind() == ProblemKind::Up;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sign = |rng: &mut ChaCha8Rng| if signed && rng.gen::<bool>() { -1.0 } else { 1.0 };
    for trial in 0..samples {
        let case = trial % 4;
        let j = rng.gen_range(0..m);
        let mut x: Vec<f64> = (0..2 * m)
            .map(|_| {
                if signed {
                    rng.gen_range(-bound..=bound)
                } else {
                    rng.gen_range(0.0..=bound)
                }
            })
            .collect();
        // margins are bounded away from the thresholds so the strict
        // inequality is tested with real slack, not float noise
        let big = bound * (1.0 + rng.gen_range(1e-3..=3.0));
        let small = rng.gen_range(0.0..=split);
        let medium = split * (1.0 + rng.gen_range(1e-3..=1.0));
        match case {
            0 => {
                x[j] = sign(&mut rng) * big;
                x[m + j] = sign(&mut rng) * small;
            }
            1 => {
                x[m + j] = sign(&mut rng) * big;
                x[j] = sign(&mut rng) * small;
            }
            2 => {
                x[j] = sign(&mut rng) * big;
                x[m + j] = sign(&mut rng) * medium;
            }
            _ => {
                x[m + j] = sign(&mut rng) * big;
                x[j] = sign(&mut rng) * medium;
            }
        }
        let p = CandidatePoint::new(x).expect("samples are finite");
        let f = eval_objective(inst, &p)?;
        if !(f > mf) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Row-sum relaxation of the penalized objective, a lower bound obtained by
/// dropping the signed-sum row: `sum_i (u_i + v_i - 1)^2 +
/// lambda (sum_i |u_i| + |v_i| - ||(u, v)||_2)`.
pub fn lower_bound_objective(u: &[f64], v: &[f64], lambda: f64) -> Result<f64> {
    if u.len() != v.len() || u.is_empty() {
        return Err(Error::DimensionMismatch(
            "u and v must be nonempty and of equal length".into(),
        ));
    }
    let sq: f64 = u
        .iter()
        .zip(v)
        .map(|(&a, &b)| (a + b - 1.0) * (a + b - 1.0))
        .sum();
    let l1: f64 = u.iter().chain(v).map(|x| x.abs()).sum();
    let l2: f64 = u.iter().chain(v).map(|x| x * x).sum::<f64>().sqrt();
    Ok(sq + lambda * (l1 - l2))
}

/// The three local moves that strictly improve the row-sum relaxation at any
/// point off the optimal pattern set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExchangeCase {
    /// Premise `u_i + v_i < 0`; move to `(-u_i, -v_i)`.
    NegativePairSum,
    /// Premise `u_i = v_i = 0`; move to `(1 - lambda/2, 0)`.
    ZeroPair,
    /// Premise `u_i > 0` and `v_i > 0`; move to `(u_i + v_i, 0)`.
    PositivePair,
}

/// Applies the exchange move for `case` at coordinate `i`, validating its
/// premise first.
pub fn exchange_point(
    u: &[f64],
    v: &[f64],
    i: usize,
    case: ExchangeCase,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if u.len() != v.len() || i >= u.len() {
        return Err(Error::DimensionMismatch(format!(
            "index {i} out of range for length {}",
            u.len()
        )));
    }
    let (mut nu, mut nv) = (u.to_vec(), v.to_vec());
    match case {
        ExchangeCase::NegativePairSum => {
            if !(u[i] + v[i] < 0.0) {
                return Err(Error::InvalidParams(format!(
                    "premise u_i + v_i < 0 fails: {} + {}",
                    u[i], v[i]
                )));
            }
            nu[i] = -u[i];
            nv[i] = -v[i];
        }
        ExchangeCase::ZeroPair => {
            if u[i] != 0.0 || v[i] != 0.0 {
                return Err(Error::InvalidParams(format!(
                    "premise u_i = v_i = 0 fails: ({}, {})",
                    u[i], v[i]
                )));
            }
            nu[i] = 1.0 - 0.5 * lambda;
            nv[i] = 0.0;
        }
        ExchangeCase::PositivePair => {
            if !(u[i] > 0.0 && v[i] > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "premise u_i > 0, v_i > 0 fails: ({}, {})",
                    u[i], v[i]
                )));
            }
            nu[i] = u[i] + v[i];
            nv[i] = 0.0;
        }
    }
    Ok((nu, nv))
}

/// Samples random points satisfying each exchange premise and verifies the
/// move strictly decreases the row-sum relaxation, matching the predicted
/// decrease where a closed form exists. Requires `lambda` in `(0, 2)`.
pub fn check_exchange_moves(
    m: usize,
    lambda: f64,
    samples_per_case: usize,
    seed: u64,
) -> Result<bool> {
    if m == 0 {
        return Err(Error::InvalidParams("m must be positive".into()));
    }
    if !(lambda > 0.0 && lambda < 2.0) {
        return Err(Error::InvalidParams(format!(
            "exchange moves are strict only for lambda in (0, 2), got {lambda}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in [
        ExchangeCase::NegativePairSum,
        ExchangeCase::ZeroPair,
        ExchangeCase::PositivePair,
    ] {
        for _ in 0..samples_per_case {
            let i = rng.gen_range(0..m);
            let mut u: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..=2.0)).collect();
            let mut v: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..=2.0)).collect();
            match case {
                ExchangeCase::NegativePairSum => {
                    // pair sum bounded away from zero so the strict decrease
                    // -4(u_i + v_i) dominates float rounding
                    u[i] = rng.gen_range(-2.0..=0.0);
                    v[i] = rng.gen_range(-2.0..=(-u[i] - 1e-3));
                }
                ExchangeCase::ZeroPair => {
                    u[i] = 0.0;
                    v[i] = 0.0;
                }
                ExchangeCase::PositivePair => {
                    u[i] = rng.gen_range(1e-2..=2.0);
                    v[i] = rng.gen_range(1e-2..=2.0);
                }
            }
            let before = lower_bound_objective(&u, &v, lambda)?;
            let (nu, nv) = exchange_point(&u, &v, i, case, lambda)?;
            let after = lower_bound_objective(&nu, &nv, lambda)?;
            if !(after < before) {
                return Ok(false);
            }
            match case {
                ExchangeCase::NegativePairSum => {
                    let predicted = -4.0 * (u[i] + v[i]);
                    if ((before - after) - predicted).abs() > 1e-9 * (1.0 + predicted.abs()) {
                        return Ok(false);
                    }
                }
                ExchangeCase::ZeroPair => {
                    let floor = (2.0 - lambda) * (2.0 - lambda) / 4.0;
                    if before - after <= floor - 1e-12 {
                        return Ok(false);
                    }
                }
                ExchangeCase::PositivePair => {
                    let rest: f64 = (0..m)
                        .filter(|&j| j != i)
                        .map(|j| u[j] * u[j] + v[j] * v[j])
                        .sum();
                    let predicted = lambda
                        * (((u[i] + v[i]) * (u[i] + v[i]) + rest).sqrt()
                            - (u[i] * u[i] + v[i] * v[i] + rest).sqrt());
                    if ((before - after) - predicted).abs() > 1e-9 * (1.0 + predicted.abs()) {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}
