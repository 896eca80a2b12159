//! Numerical solvers for the five problem kinds.
//!
//! All kinds share one engine: the objective is split into a convex part
//! `w_q ||Ax-b||^2 + w_1 ||x||_1 (+ indicator of x >= 0)` and a concave part
//! `-w_2 ||x||_2` (or `-||x||_2^2` for the quadratic kind). Each outer step
//! linearizes the concave part at the current iterate and minimizes the
//! resulting convex subproblem with an accelerated proximal-gradient loop.
//! A candidate step is accepted only if it does not increase the stage
//! objective, so recorded trajectories are non-increasing by construction.
//!
//! Equality-constrained kinds run the same engine under a quadratic penalty
//! `rho ||Ax-b||^2` with an increasing schedule, warm-starting each stage.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{
    eval_feasibility, norm_l1, norm_l2, CandidatePoint, EvaluationResult, ProblemInstance,
    ProblemKind,
};
use crate::reduction::{closed_form_targets, ReductionParams};
use crate::{Error, Result};

/// How multi-start draws initial points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Always start from the origin.
    Zero,
    /// Uniform in a kind-dependent box: the escape box for the penalized
    /// kinds (nonnegative half for NUP), `[0, 2]^n` for the constrained
    /// kinds, `[-2, 2]^n` (or `[0, 2]^n` when nonnegative) for generic data.
    RandomBox,
    /// A uniformly random optimal pattern plus Gaussian noise with standard
    /// deviation `0.1 c`. Requires a reduction-built instance.
    PerturbedPattern,
}

/// Solver configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Maximum outer (linearization) steps per stage.
    pub max_outer_iters: usize,
    /// Maximum inner proximal-gradient iterations per subproblem.
    pub inner_iters: usize,
    /// Stop when both the relative objective change and the step norm fall
    /// below this.
    pub stop_tol: f64,
    /// Increasing penalty weights for the equality-constrained kinds.
    pub penalty_schedule: Vec<f64>,
    /// Number of multi-start runs.
    pub n_starts: usize,
    /// Base seed; start `i` uses the same seed on RNG stream `i`.
    pub seed: u64,
    /// Initial-point strategy.
    pub init: InitStrategy,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_outer_iters: 500,
            inner_iters: 2000,
            stop_tol: 1e-8,
            penalty_schedule: (0..9).map(|k| 10f64.powi(k)).collect(),
            n_starts: 50,
            seed: 0,
            init: InitStrategy::PerturbedPattern,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 || self.inner_iters == 0 || self.n_starts == 0 {
            return Err(Error::InvalidParams(
                "iteration and start counts must be positive".into(),
            ));
        }
        if !(self.stop_tol > 0.0) {
            return Err(Error::InvalidParams(format!(
                "stop_tol must be positive, got {}",
                self.stop_tol
            )));
        }
        if self.penalty_schedule.is_empty()
            || self.penalty_schedule.iter().any(|&r| !(r > 0.0) || !r.is_finite())
            || self.penalty_schedule.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidParams(
                "penalty schedule must be positive and strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Result of a solve (for multi-start: the best start, with all per-start
/// values attached).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Best point found.
    pub best_point: CandidatePoint,
    /// Instance objective at the best point (the true objective, never the
    /// penalized one).
    pub best_value: f64,
    /// Instance objective reached by each start, in start order.
    pub per_start_values: Vec<f64>,
    /// Accepted outer steps of the best start (last stage for penalty runs).
    pub outer_iterations: usize,
    /// Stage-objective values of the best start's accepted iterates,
    /// beginning with the initial point; non-increasing by construction.
    /// For penalty runs this covers the final stage.
    pub objective_trajectory: Vec<f64>,
    /// First-order criticality residual at the best point.
    pub criticality_residual: f64,
    /// Objective and constraint residuals at the best point.
    pub feasibility: EvaluationResult,
    /// Stop tolerance met (and, for constrained kinds, equality residual at
    /// most 1e-6).
    pub converged: bool,
}

/// Required feasibility level for a converged constrained solve.
const FEASIBILITY_TOL: f64 = 1e-6;
/// Iterate-explosion guard for penalty stages that are not yet coercive.
/// Legitimate iterates stay within the escape box, a few dozen at most.
const DIVERGENCE_NORM: f64 = 1e7;

// ---------------------------------------------------------------------------
// stage description

#[derive(Clone, Copy)]
enum ConcavePart {
    /// `-w * ||x||_2`
    Norm(f64),
    /// `-||x||_2^2`
    NormSquared,
}

#[derive(Clone, Copy)]
struct Stage {
    quad_weight: f64,
    l1_weight: f64,
    concave: ConcavePart,
    /// Strong-convexity shift for the quadratic concave part: the split
    /// becomes `(convex + r/2 ||x||^2) - (||x||^2 + r/2 ||x||^2)`, which
    /// leaves the objective unchanged but keeps every linearized subproblem
    /// bounded (the plain linearization of `-||x||^2` is unbounded along the
    /// null space of `A`).
    ridge: f64,
    nonneg: bool,
}

impl Stage {
    fn for_instance(inst: &ProblemInstance, rho: f64) -> Stage {
        match inst.kind() {
            ProblemKind::Up | ProblemKind::Nup | ProblemKind::Generic => {
                let lambda = inst.lambda().expect("penalized kind carries lambda");
                Stage {
                    quad_weight: 1.0,
                    l1_weight: lambda,
                    concave: ConcavePart::Norm(lambda),
                    ridge: 0.0,
                    nonneg: inst.nonneg(),
                }
            }
            ProblemKind::Cp | ProblemKind::Ncp => {
                let tau = inst.tau().expect("constrained kind carries tau");
                Stage {
                    quad_weight: rho,
                    l1_weight: 1.0,
                    concave: ConcavePart::Norm(tau),
                    ridge: 0.0,
                    nonneg: inst.nonneg(),
                }
            }
            ProblemKind::Pqp => Stage {
                quad_weight: rho,
                l1_weight: 0.0,
                concave: ConcavePart::NormSquared,
                ridge: 2.0,
                nonneg: true,
            },
        }
    }

    fn objective(&self, a: &Array2<f64>, b: &Array1<f64>, x: &Array1<f64>) -> f64 {
        let r = a.dot(x) - b;
        let xs = x.as_slice().expect("contiguous");
        let concave = match self.concave {
            ConcavePart::Norm(w) => w * norm_l2(xs),
            ConcavePart::NormSquared => x.dot(x),
        };
        self.quad_weight * r.dot(&r) + self.l1_weight * norm_l1(xs) - concave
    }

    /// Gradient of the (ridge-shifted) concave part at the linearization
    /// point.
    fn concave_gradient(&self, x: &Array1<f64>) -> Array1<f64> {
        match self.concave {
            ConcavePart::Norm(w) => {
                let n = norm_l2(x.as_slice().expect("contiguous"));
                if n == 0.0 {
                    Array1::zeros(x.len())
                } else {
                    x.mapv(|v| w * v / n)
                }
            }
            ConcavePart::NormSquared => x.mapv(|v| (2.0 + self.ridge) * v),
        }
    }
}

// ---------------------------------------------------------------------------
// inner loop

fn prox(z: f64, amount: f64, nonneg: bool) -> f64 {
    if nonneg {
        (z - amount).max(0.0)
    } else if z > amount {
        z - amount
    } else if z < -amount {
        z + amount
    } else {
        0.0
    }
}

/// Largest eigenvalue of `A^T A`, estimated by 100 power iterations from a
/// fixed pseudo-random direction (the all-ones vector is an eigenvector of
/// the reduction matrix, so a structured start would stall).
fn largest_eig_ata(a: &Array2<f64>) -> f64 {
    let n = a.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9_7f4a_7c15);
    let mut v = Array1::from_shape_fn(n, |_| rng.gen_range(-1.0f64..=1.0));
    let mut norm = v.dot(&v).sqrt();
    if norm == 0.0 {
        v.fill(1.0);
        norm = (n as f64).sqrt();
    }
    v.mapv_inplace(|x| x / norm);
    for _ in 0..100 {
        let w = a.t().dot(&a.dot(&v));
        let wn = w.dot(&w).sqrt();
        if wn == 0.0 {
            return 0.0;
        }
        v = w / wn;
    }
    let av = a.dot(&v);
    av.dot(&av)
}

/// Accelerated proximal-gradient loop for
/// `w_q ||Ax - b||^2 + (r/2) ||x||^2 + w_1 ||x||_1 - y^T x` (optionally over
/// `x >= 0`), with fixed step `1/L` and gradient-based momentum restarts.
///
/// `tol` bounds the prox-gradient mapping residual `||z - prox(z - step g)||
/// / step`, so the exit test does not silently loosen as the step shrinks on
/// stiff subproblems; a per-step change at float resolution also exits.
///
/// This is the inner subproblem solver; it is exposed because its fixed
/// points are plain soft-thresholding solutions that can be checked in
/// closed form. Pass `ridge = 0` for the unshifted problem.
pub fn prox_gradient_l1ls(
    a: &Array2<f64>,
    b: &Array1<f64>,
    quad_weight: f64,
    ridge: f64,
    l1_weight: f64,
    linear: &Array1<f64>,
    nonneg: bool,
    x0: &Array1<f64>,
    step: f64,
    max_iters: usize,
    tol: f64,
) -> Array1<f64> {
    let rows = a.nrows();
    let n = x0.len();
    // the matrices here are tiny (tens of entries per side); plain loops
    // over the contiguous buffer beat generic matrix dispatch
    let a_flat = a.as_slice().expect("instance matrices are standard layout");
    let b_flat = b.as_slice().expect("contiguous");
    let y_flat = linear.as_slice().expect("contiguous");
    let mut x = x0.to_vec();
    let mut z = x0.to_vec();
    let mut xn = vec![0.0; n];
    let mut r = vec![0.0; rows];
    let mut theta = 1.0f64;
    let amount = step * l1_weight;
    for _ in 0..max_iters {
        // r = A z - b
        for (j, rj) in r.iter_mut().enumerate() {
            let row = &a_flat[j * n..(j + 1) * n];
            let mut acc = -b_flat[j];
            for i in 0..n {
                acc += row[i] * z[i];
            }
            *rj = acc;
        }
        // per coordinate: grad_i = 2 w_q (A^T r)_i + ridge z_i - y_i
        let two_q = 2.0 * quad_weight;
        let mut restart_dot = 0.0;
        let mut pg_norm = 0.0;
        for i in 0..n {
            let mut at_r = 0.0;
            for j in 0..rows {
                at_r += a_flat[j * n + i] * r[j];
            }
            let grad = two_q * at_r + ridge * z[i] - y_flat[i];
            xn[i] = prox(z[i] - step * grad, amount, nonneg);
            let d = z[i] - xn[i];
            restart_dot += d * (xn[i] - x[i]);
            pg_norm += d * d;
        }
        // restart momentum when it points against the descent direction
        if restart_dot > 0.0 {
            theta = 1.0;
            z.copy_from_slice(&xn);
        } else {
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let coeff = (theta - 1.0) / theta_next;
            for i in 0..n {
                z[i] = xn[i] + coeff * (xn[i] - x[i]);
            }
            theta = theta_next;
        }
        let mut x_norm = 0.0;
        for i in 0..n {
            x_norm += xn[i] * xn[i];
        }
        x.copy_from_slice(&xn);
        let scale = 1.0 + x_norm.sqrt();
        if pg_norm.sqrt() <= (tol * step).max(8.0 * f64::EPSILON) * scale {
            break;
        }
    }
    Array1::from(x)
}

// ---------------------------------------------------------------------------
// outer loop

struct StageOutcome {
    x: Array1<f64>,
    trajectory: Vec<f64>,
    outer_iterations: usize,
    converged: bool,
}

/// Runs the linearize-and-descend loop for one stage from `x0`.
/// The recorded trajectory is non-increasing: a candidate that fails to
/// improve the stage objective is rejected and the loop stops.
fn descend_stage(
    a: &Array2<f64>,
    b: &Array1<f64>,
    stage: Stage,
    lmax: f64,
    x0: Array1<f64>,
    opts: &SolverOptions,
) -> Result<StageOutcome> {
    let step = 1.0 / (2.0 * stage.quad_weight * lmax + stage.ridge).max(1e-12);
    // the inner tolerance is a gradient-scale bound; anchoring it to the
    // unit-weight curvature keeps the requested accuracy in x constant as the
    // penalty weight grows (the step shrinks like 1/rho, so a fixed
    // step-norm test would stop the subproblem solver almost immediately)
    let inner_tol =
        0.5 * opts.stop_tol * (2.0 * stage.quad_weight.min(1.0) * lmax + stage.ridge).max(1e-12);
    let mut x = x0;
    let mut fx = stage.objective(a, b, &x);
    if !fx.is_finite() {
        return Err(Error::Numerical("stage objective not finite at start".into()));
    }
    let mut trajectory = vec![fx];
    let mut converged = false;
    let mut outer_iterations = 0;
    for _ in 0..opts.max_outer_iters {
        let y = stage.concave_gradient(&x);
        let xn = prox_gradient_l1ls(
            a,
            b,
            stage.quad_weight,
            stage.ridge,
            stage.l1_weight,
            &y,
            stage.nonneg,
            &x,
            step,
            opts.inner_iters,
            inner_tol,
        );
        if xn.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite iterate in inner loop".into()));
        }
        let fn_ = stage.objective(a, b, &xn);
        if !fn_.is_finite() || norm_l2(xn.as_slice().expect("contiguous")) > DIVERGENCE_NORM {
            return Err(Error::Numerical("stage diverged".into()));
        }
        if fn_ > fx {
            // inexact inner solve could not improve; keep the current point
            break;
        }
        let step_norm = (&xn - &x).dot(&(&xn - &x)).sqrt();
        let x_norm = x.dot(&x).sqrt();
        let rel_change = (fx - fn_).abs() / fx.abs().max(1.0);
        x = xn;
        fx = fn_;
        trajectory.push(fx);
        outer_iterations += 1;
        if rel_change <= opts.stop_tol && step_norm <= opts.stop_tol * (1.0 + x_norm) {
            converged = true;
            break;
        }
    }
    Ok(StageOutcome {
        x,
        trajectory,
        outer_iterations,
        converged,
    })
}

fn report_from(
    inst: &ProblemInstance,
    x: Array1<f64>,
    trajectory: Vec<f64>,
    outer_iterations: usize,
    stop_converged: bool,
) -> Result<SolveReport> {
    let point = CandidatePoint::new(x.to_vec())
        .map_err(|_| Error::Numerical("solver produced a non-finite point".into()))?;
    let feasibility = eval_feasibility(inst, &point)?;
    let converged = if inst.kind().is_equality_constrained() {
        stop_converged && feasibility.equality_residual <= FEASIBILITY_TOL
    } else {
        stop_converged
    };
    let criticality = criticality_residual(inst, &point)?;
    Ok(SolveReport {
        best_value: feasibility.objective,
        per_start_values: vec![feasibility.objective],
        best_point: point,
        outer_iterations,
        objective_trajectory: trajectory,
        criticality_residual: criticality,
        feasibility,
        converged,
    })
}

/// Difference-of-convex descent for the penalized kinds (UP, NUP, and
/// generic data) from an explicit starting point.
pub fn dca_solve(
    inst: &ProblemInstance,
    x0: &CandidatePoint,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    if !matches!(
        inst.kind(),
        ProblemKind::Up | ProblemKind::Nup | ProblemKind::Generic
    ) {
        return Err(Error::UnsupportedKind(format!(
            "dca_solve handles the penalized kinds; {} goes through penalty_solve",
            inst.kind()
        )));
    }
    if x0.len() != inst.dim() {
        return Err(Error::DimensionMismatch(format!(
            "start has {} coordinates, instance expects {}",
            x0.len(),
            inst.dim()
        )));
    }
    let stage = Stage::for_instance(inst, 1.0);
    let lmax = largest_eig_ata(inst.a());
    let out = descend_stage(
        inst.a(),
        inst.b(),
        stage,
        lmax,
        Array1::from(x0.coords().to_vec()),
        opts,
    )?;
    report_from(inst, out.x, out.trajectory, out.outer_iterations, out.converged)
}

/// Quadratic-penalty solve for the equality-constrained kinds, warm-starting
/// each stage of the schedule. The returned report describes the final
/// stage; `converged` additionally requires equality residual at most 1e-6.
pub fn penalty_solve(inst: &ProblemInstance, opts: &SolverOptions) -> Result<SolveReport> {
    opts.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let x0 = draw_start(inst, opts.init, &mut rng)?;
    penalty_solve_from(inst, x0, opts)
}

fn penalty_solve_from(
    inst: &ProblemInstance,
    x0: Array1<f64>,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    if !inst.kind().is_equality_constrained() {
        return Err(Error::UnsupportedKind(format!(
            "penalty_solve handles the equality-constrained kinds, not {}",
            inst.kind()
        )));
    }
    if x0.len() != inst.dim() {
        return Err(Error::DimensionMismatch(format!(
            "start has {} coordinates, instance expects {}",
            x0.len(),
            inst.dim()
        )));
    }
    let lmax = largest_eig_ata(inst.a());
    let mut x = x0;
    let mut last: Option<StageOutcome> = None;
    for &rho in &opts.penalty_schedule {
        // for the quadratic kind, a stage is bounded below on the cone only
        // once the penalty outweighs the concave curvature: per coordinate
        // the sum s = u + v contributes rho (s-1)^2 - s^2, linear at rho = 1
        if matches!(inst.kind(), ProblemKind::Pqp) && rho <= 1.0 {
            continue;
        }
        let stage = Stage::for_instance(inst, rho);
        match descend_stage(inst.a(), inst.b(), stage, lmax, x.clone(), opts) {
            Ok(out) => {
                x = out.x.clone();
                let settled = out.converged;
                last = Some(out);
                // the remaining stages only polish feasibility; skip them
                // once the residual is already safely under the target
                if settled {
                    let r = inst.a().dot(&x) - inst.b();
                    let residual = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    if residual <= 0.5 * FEASIBILITY_TOL {
                        break;
                    }
                }
            }
            Err(Error::Numerical(_)) => {
                // stage not yet coercive (small rho can be unbounded below);
                // discard its iterates and move to the next weight
                continue;
            }
            Err(e) => return Err(e),
        }
    }
    let out = last.ok_or_else(|| Error::Numerical("no penalty stage produced an iterate".into()))?;
    report_from(inst, out.x, out.trajectory, out.outer_iterations, out.converged)
}

fn draw_start(
    inst: &ProblemInstance,
    strategy: InitStrategy,
    rng: &mut ChaCha8Rng,
) -> Result<Array1<f64>> {
    let dim = inst.dim();
    match strategy {
        InitStrategy::Zero => Ok(Array1::zeros(dim)),
        InitStrategy::RandomBox => {
            let (lo, hi) = match inst.kind() {
                ProblemKind::Up | ProblemKind::Nup => {
                    let m = inst.source().map(|s| s.len()).unwrap_or(dim / 2);
                    let params = ReductionParams::for_kind(inst.kind(), None, inst.lambda())?;
                    let bound = closed_form_targets(m, &params)?
                        .escape_box
                        .unwrap_or(2.0);
                    if inst.nonneg() {
                        (0.0, bound)
                    } else {
                        (-bound, bound)
                    }
                }
                ProblemKind::Cp | ProblemKind::Ncp | ProblemKind::Pqp => (0.0, 2.0),
                ProblemKind::Generic => {
                    if inst.nonneg() {
                        (0.0, 2.0)
                    } else {
                        (-2.0, 2.0)
                    }
                }
            };
            Ok(Array1::from_shape_fn(dim, |_| rng.gen_range(lo..=hi)))
        }
        InitStrategy::PerturbedPattern => {
            let s = inst.source().ok_or_else(|| {
                Error::InvalidParams(
                    "perturbed_pattern starts need a reduction-built instance".into(),
                )
            })?;
            let m = s.len();
            let params = ReductionParams::for_kind(inst.kind(), inst.tau(), inst.lambda())?;
            let c = closed_form_targets(m, &params)?.pattern_magnitude;
            let mask = rng.gen::<u64>() & ((1u64 << m) - 1);
            let base = crate::oracles::pattern_point(m, c, mask);
            let sigma = 0.1 * c;
            let mut x = Array1::from(base.coords().to_vec());
            for v in x.iter_mut() {
                *v += sigma * standard_normal(rng);
            }
            Ok(x)
        }
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u1 bounded away from zero so the log stays finite
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Runs `n_starts` independent solves (difference-of-convex for the
/// penalized kinds, penalty for the constrained ones), each seeded on its
/// own RNG stream, and keeps the best final value (ties: lowest start
/// index). Starts run in parallel; aggregation folds in start order, so the
/// result is reproducible bit for bit for a fixed seed.
pub fn multi_start_solve(inst: &ProblemInstance, opts: &SolverOptions) -> Result<SolveReport> {
    opts.validate()?;
    let dca_kind = matches!(
        inst.kind(),
        ProblemKind::Up | ProblemKind::Nup | ProblemKind::Generic
    );
    let runs: Vec<Result<SolveReport>> = (0..opts.n_starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(i as u64);
            let x0 = draw_start(inst, opts.init, &mut rng)?;
            if dca_kind {
                let p = CandidatePoint::new(x0.to_vec())
                    .map_err(|_| Error::Numerical("non-finite start".into()))?;
                dca_solve(inst, &p, opts)
            } else {
                penalty_solve_from(inst, x0, opts)
            }
        })
        .collect();
    let mut reports = Vec::with_capacity(opts.n_starts);
    for r in runs {
        reports.push(r?);
    }
    let mut best_idx = 0;
    for (i, r) in reports.iter().enumerate() {
        if r.best_value < reports[best_idx].best_value {
            best_idx = i;
        }
    }
    let per_start_values: Vec<f64> = reports.iter().map(|r| r.best_value).collect();
    let mut best = reports.swap_remove(best_idx);
    best.per_start_values = per_start_values;
    Ok(best)
}

// ---------------------------------------------------------------------------
// criticality

/// First-order criticality residual at `p`.
///
/// Penalized kinds: the norm of the proximal-gradient fixed-point step at
/// `p`, scaled by the step size; zero exactly at points satisfying the
/// stationarity inclusion, and at differentiable points of the nonnegative
/// problem this is the usual KKT residual. Constrained kinds: the KKT
/// stationarity residual with least-squares equality multipliers, folding
/// sign constraints on the multipliers of active bounds.
pub fn criticality_residual(inst: &ProblemInstance, p: &CandidatePoint) -> Result<f64> {
    if p.len() != inst.dim() {
        return Err(Error::DimensionMismatch(format!(
            "point has {} coordinates, instance expects {}",
            p.len(),
            inst.dim()
        )));
    }
    let x = Array1::from(p.coords().to_vec());
    match inst.kind() {
        ProblemKind::Up | ProblemKind::Nup | ProblemKind::Generic => {
            let lambda = inst.lambda().expect("penalized kind carries lambda");
            let lmax = largest_eig_ata(inst.a());
            let step = 1.0 / (2.0 * lmax).max(1e-12);
            let n = x.dot(&x).sqrt();
            let y = if n == 0.0 {
                Array1::zeros(x.len())
            } else {
                x.mapv(|v| lambda * v / n)
            };
            let r = inst.a().dot(&x) - inst.b();
            let grad = inst.a().t().dot(&r).mapv(|v| 2.0 * v) - &y;
            let mut fixed = 0.0;
            for i in 0..x.len() {
                let xi_hat = prox(x[i] - step * grad[i], step * lambda, inst.nonneg());
                let d = x[i] - xi_hat;
                fixed += d * d;
            }
            Ok(fixed.sqrt() / step)
        }
        ProblemKind::Cp | ProblemKind::Ncp | ProblemKind::Pqp => {
            kkt_residual_constrained(inst, &x)
        }
    }
}

fn kkt_residual_constrained(inst: &ProblemInstance, x: &Array1<f64>) -> Result<f64> {
    let n = x.len();
    let norm = x.dot(x).sqrt();
    let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let active_tol = 1e-9 * (1.0 + scale);
    // objective gradient contribution per coordinate, with the L1 subgradient
    // left free on inactive (zero) coordinates of the signed problem
    let grad_at = |i: usize| -> f64 {
        match inst.kind() {
            ProblemKind::Cp => {
                let tau = inst.tau().unwrap();
                let l2 = if norm == 0.0 { 0.0 } else { tau * x[i] / norm };
                x[i].signum() * f64::from(x[i].abs() > active_tol) - l2
            }
            ProblemKind::Ncp => {
                let tau = inst.tau().unwrap();
                let l2 = if norm == 0.0 { 0.0 } else { tau * x[i] / norm };
                1.0 - l2
            }
            ProblemKind::Pqp => -2.0 * x[i],
            _ => unreachable!(),
        }
    };
    let support: Vec<usize> = (0..n)
        .filter(|&i| {
            if inst.kind() == ProblemKind::Cp {
                x[i].abs() > active_tol
            } else {
                x[i] > active_tol
            }
        })
        .collect();
    let rows = inst.a().nrows();
    // least-squares multipliers over the support coordinates
    let mu = if support.is_empty() {
        Array1::zeros(rows)
    } else {
        let mut ap = Array2::<f64>::zeros((support.len(), rows));
        let mut dp = Array1::<f64>::zeros(support.len());
        for (r, &i) in support.iter().enumerate() {
            for c in 0..rows {
                ap[[r, c]] = inst.a()[[c, i]];
            }
            dp[r] = grad_at(i);
        }
        let gram = ap.t().dot(&ap);
        let rhs = ap.t().dot(&dp).mapv(|v| -v);
        solve_spd(gram, rhs)?
    };
    let at_mu = inst.a().t().dot(&mu);
    let mut acc = 0.0;
    for i in 0..n {
        let active = support.binary_search(&i).is_ok();
        let q = grad_at(i) + at_mu[i];
        let viol = if active {
            q
        } else {
            match inst.kind() {
                // free L1 subgradient absorbs anything in [-1, 1]
                ProblemKind::Cp => (q.abs() - 1.0).max(0.0),
                // bound multiplier must be nonnegative
                _ => (-q).max(0.0),
            }
        };
        acc += viol * viol;
    }
    Ok(acc.sqrt())
}

/// Cholesky solve with a tiny diagonal ridge; the Gram matrices here are at
/// most (m+2)-dimensional.
fn solve_spd(mut g: Array2<f64>, rhs: Array1<f64>) -> Result<Array1<f64>> {
    let n = g.nrows();
    let jitter = 1e-12 * (1.0 + g.diag().iter().fold(0.0f64, |a, &v| a.max(v.abs())));
    for i in 0..n {
        g[[i, i]] += jitter;
    }
    // in-place lower Cholesky
    for j in 0..n {
        for k in 0..j {
            let l = g[[j, k]];
            for i in j..n {
                g[[i, j]] -= g[[i, k]] * l;
            }
        }
        let d = g[[j, j]];
        if !(d > 0.0) {
            return Err(Error::Numerical("singular multiplier system".into()));
        }
        let root = d.sqrt();
        for i in j..n {
            g[[i, j]] /= root;
        }
    }
    // forward then backward substitution
    let mut y = rhs;
    for i in 0..n {
        for k in 0..i {
            let l = g[[i, k]] * y[k];
            y[i] -= l;
        }
        y[i] /= g[[i, i]];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let l = g[[k, i]] * y[k];
            y[i] -= l;
        }
        y[i] /= g[[i, i]];
    }
    Ok(y)
}

#[allow(unused)]
fn as_view(x: &[f64]) -> ArrayView1<'_, f64> {
    ArrayView1::from(x)
}
