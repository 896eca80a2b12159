//! Named verification suites behind `l12lab verify`.
//!
//! Each suite re-runs one family of checks at the same parameters the
//! acceptance tests fix, and reports one machine-readable line per check
//! instead of panicking. Slugs name the property checked.

use std::f64::consts::FRAC_1_SQRT_2;

use anyhow::{bail, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use l12lab::corpus::{random_multiset, standard_corpus};
use l12lab::model::ProblemKind;
use l12lab::oracles::{
    check_escape_box, check_exchange_moves, check_gw_unique_minimizer, enumerate_pattern_minimum,
    eval_g_w, eval_h_t, finite_diff_gradient, grad_g_w, grid_minimize, kkt_residual_nup,
    lower_bound_objective, pattern_point, GridSpec,
};
use l12lab::reduction::{
    build_instance, decide_partition, pattern_magnitude, penalized_optimum, Answer, DecideMethod,
    ReductionParams,
};

const TAUS: [f64; 3] = [FRAC_1_SQRT_2, 1.0, 1.4];
const LAMBDAS: [f64; 3] = [0.5, 1.0, 1.5];

/// Suite names with one-line descriptions, for help text and errors.
pub const SUITES: &[(&str, &str)] = &[
    (
        "quadratic",
        "corpus-wide: quadratic pattern minimum is exactly -m iff a balanced split exists",
    ),
    (
        "constrained",
        "corpus-wide: constrained pattern minimum attains m - tau*sqrt(m) iff balanced",
    ),
    (
        "constrained-nonneg",
        "same as `constrained` for the sign-constrained variant",
    ),
    (
        "penalized",
        "corpus-wide: penalized pattern minimum attains its closed form iff balanced, with a floor on the NO gap",
    ),
    (
        "penalized-nonneg",
        "same as `penalized` for the sign-constrained variant",
    ),
    (
        "origin-minimizer",
        "reduced objective: grid scan and random descents put the unique minimizer at the origin; gradient matches finite differences",
    ),
    (
        "diagonal-optimum",
        "diagonal restriction: stationarity and value at the closed-form point; grid minimum sits there",
    ),
    (
        "pattern-structure",
        "exchange moves strictly decrease the lower bound; tiny-scale global grid minimum is a pattern point",
    ),
    (
        "escape-box",
        "outside the escape box the penalized objective stays above the zero-point value",
    ),
    ("all", "every suite above, in order"),
];

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub check: String,
    pub pass: bool,
    pub details: serde_json::Value,
}

pub fn run_suite(name: &str, seed: u64) -> Result<Vec<Check>> {
    match name {
        "quadratic" => quadratic(),
        "constrained" => constrained(ProblemKind::Cp),
        "constrained-nonneg" => constrained(ProblemKind::Ncp),
        "penalized" => penalized(ProblemKind::Up),
        "penalized-nonneg" => penalized(ProblemKind::Nup),
        "origin-minimizer" => origin_minimizer(seed),
        "diagonal-optimum" => diagonal_optimum(),
        "pattern-structure" => pattern_structure(seed),
        "escape-box" => escape_box(seed),
        "all" => {
            let mut checks = Vec::new();
            for (suite, _) in SUITES.iter().filter(|(n, _)| *n != "all") {
                checks.extend(run_suite(suite, seed)?);
            }
            Ok(checks)
        }
        other => {
            let names: Vec<&str> = SUITES.iter().map(|(n, _)| *n).collect();
            bail!("unknown suite `{other}`; available: {}", names.join(", "));
        }
    }
}

fn quadratic() -> Result<Vec<Check>> {
    let corpus = standard_corpus();
    let mut balanced = 0usize;
    let mut mismatches = 0usize;
    for entry in &corpus {
        let inst = build_instance(&entry.instance, &ReductionParams::pqp())?;
        let pm = enumerate_pattern_minimum(&inst)?;
        let m = entry.instance.len() as f64;
        let ok = if entry.balanced {
            balanced += 1;
            pm.balanced_exists() && pm.feasible && pm.value == -m
        } else {
            !pm.balanced_exists() && !pm.feasible && pm.value.is_infinite()
        };
        if !ok {
            mismatches += 1;
        }
    }
    Ok(vec![Check {
        suite: "quadratic",
        check: "pattern-minimum-is-minus-m-iff-balanced".into(),
        pass: mismatches == 0,
        details: json!({
            "instances": corpus.len(),
            "balanced": balanced,
            "mismatches": mismatches,
        }),
    }])
}

fn constrained(kind: ProblemKind) -> Result<Vec<Check>> {
    let suite = if kind == ProblemKind::Cp {
        "constrained"
    } else {
        "constrained-nonneg"
    };
    let corpus = standard_corpus();
    let mut checks = Vec::new();
    for tau in TAUS {
        let params = ReductionParams::for_kind(kind, Some(tau), None)?;
        let mut mismatches = 0usize;
        for entry in &corpus {
            let m = entry.instance.len() as f64;
            let inst = build_instance(&entry.instance, &params)?;
            let pm = enumerate_pattern_minimum(&inst)?;
            let target = m - tau * m.sqrt();
            let attains = pm.feasible && (pm.value - target).abs() <= 1e-12;
            let d = decide_partition(&entry.instance, &params, DecideMethod::Pattern, 1e-6)?;
            if attains != entry.balanced || (d.answer == Answer::Yes) != entry.balanced {
                mismatches += 1;
            }
        }
        checks.push(Check {
            suite,
            check: format!("value-equivalence-tau-{tau:.4}"),
            pass: mismatches == 0,
            details: json!({
                "tau": tau,
                "instances": corpus.len(),
                "mismatches": mismatches,
            }),
        });
    }
    Ok(checks)
}

fn penalized(kind: ProblemKind) -> Result<Vec<Check>> {
    let suite = if kind == ProblemKind::Up {
        "penalized"
    } else {
        "penalized-nonneg"
    };
    let corpus = standard_corpus();
    let mut checks = Vec::new();
    for lambda in LAMBDAS {
        let params = ReductionParams::for_kind(kind, None, Some(lambda))?;
        let mut mismatches = 0usize;
        let mut worst_yes_error: f64 = 0.0;
        let mut least_no_gap = f64::INFINITY;
        for entry in &corpus {
            let m = entry.instance.len();
            let inst = build_instance(&entry.instance, &params)?;
            let pm = enumerate_pattern_minimum(&inst)?;
            let target = penalized_optimum(lambda, m);
            let c = pattern_magnitude(lambda, m);
            let ok = if entry.balanced {
                worst_yes_error = worst_yes_error.max((pm.value - target).abs());
                (pm.value - target).abs() <= 1e-10
            } else {
                least_no_gap = least_no_gap.min((pm.value - target) / (c * c));
                pm.value - target >= 0.9 * c * c
            };
            let d = decide_partition(&entry.instance, &params, DecideMethod::Pattern, 1e-6)?;
            if !ok || (d.answer == Answer::Yes) != entry.balanced {
                mismatches += 1;
            }
        }
        checks.push(Check {
            suite,
            check: format!("value-equivalence-lambda-{lambda}"),
            pass: mismatches == 0,
            details: json!({
                "lambda": lambda,
                "instances": corpus.len(),
                "mismatches": mismatches,
                "worst_yes_error": worst_yes_error,
                "least_no_gap_over_c_squared": least_no_gap,
            }),
        });
    }
    Ok(checks)
}

fn origin_minimizer(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut s = 4000u64.wrapping_add(seed.wrapping_mul(10_000));
    for tau in TAUS {
        for m in [1usize, 2, 3, 5] {
            for k in [1usize, 2] {
                if k > m {
                    continue;
                }
                s += 1;
                let step = if k == 1 { 1e-3 } else { 1e-2 };
                let spec = GridSpec::cube(-3.0, 3.0, k, step)?;
                let rep = check_gw_unique_minimizer(tau, m, k, &spec, 100, s)?;
                let mut rng = ChaCha8Rng::seed_from_u64(s ^ 0xabcd);
                let mut worst_fd: f64 = 0.0;
                for _ in 0..100 {
                    let w: Vec<f64> = (0..k).map(|_| rng.gen_range(-3.0..=3.0)).collect();
                    let g = grad_g_w(&w, tau, m)?;
                    let fd =
                        finite_diff_gradient(|x| eval_g_w(x, tau, m).unwrap(), &w, 1e-6);
                    for (a, b) in g.iter().zip(&fd) {
                        worst_fd = worst_fd.max((a - b).abs() / (1.0 + a.abs()));
                    }
                }
                checks.push(Check {
                    suite: "origin-minimizer",
                    check: format!("origin-is-unique-minimizer-tau-{tau:.4}-m{m}-k{k}"),
                    pass: rep.converged_to_origin && worst_fd <= 1e-5,
                    details: json!({
                        "tau": tau,
                        "m": m,
                        "k": k,
                        "grid_argmin": rep.point,
                        "worst_endpoint_gradient": rep.gradient_norm,
                        "worst_fd_relative_error": worst_fd,
                    }),
                });
            }
        }
    }
    Ok(checks)
}

fn diagonal_optimum() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for lambda in [0.1, 0.5, 1.0, 1.5, 1.9] {
        let mut worst_residual: f64 = 0.0;
        let mut worst_value_error: f64 = 0.0;
        for m in 1..=8usize {
            let c = pattern_magnitude(lambda, m);
            let t = vec![c; m];
            worst_residual = worst_residual.max(kkt_residual_nup(&t, lambda)?);
            let h = eval_h_t(&t, lambda)?;
            worst_value_error = worst_value_error.max((h - penalized_optimum(lambda, m)).abs());
        }
        checks.push(Check {
            suite: "diagonal-optimum",
            check: format!("stationary-at-closed-form-lambda-{lambda}"),
            pass: worst_residual <= 1e-12 && worst_value_error <= 1e-12,
            details: json!({
                "lambda": lambda,
                "m_range": [1, 8],
                "worst_residual": worst_residual,
                "worst_value_error": worst_value_error,
            }),
        });

        let mut worst_grid_value: f64 = 0.0;
        let mut worst_grid_coord: f64 = 0.0;
        for m in [1usize, 2] {
            let c = pattern_magnitude(lambda, m);
            let g = penalized_optimum(lambda, m);
            let spec = GridSpec::cube(0.0, 2.0, m, 1e-3)?;
            let (val, point) = grid_minimize(|t| eval_h_t(t, lambda).unwrap(), &spec)?;
            worst_grid_value = worst_grid_value.max((val - g).abs());
            for &ti in &point {
                worst_grid_coord = worst_grid_coord.max((ti - c).abs());
            }
        }
        checks.push(Check {
            suite: "diagonal-optimum",
            check: format!("grid-minimum-at-closed-form-lambda-{lambda}"),
            pass: worst_grid_value <= 1e-4 && worst_grid_coord <= 2e-3,
            details: json!({
                "lambda": lambda,
                "m_values": [1, 2],
                "worst_value_error": worst_grid_value,
                "worst_coordinate_error": worst_grid_coord,
            }),
        });
    }
    Ok(checks)
}

fn pattern_structure(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut s = 6000u64.wrapping_add(seed.wrapping_mul(10_000));
    for m in [2usize, 4] {
        for lambda in LAMBDAS {
            s += 1;
            let pass = check_exchange_moves(m, lambda, 10_000, s)?;
            checks.push(Check {
                suite: "pattern-structure",
                check: format!("exchange-move-decreases-m{m}-lambda-{lambda}"),
                pass,
                details: json!({ "m": m, "lambda": lambda, "samples_per_case": 10_000 }),
            });
        }
    }
    for lambda in LAMBDAS {
        for m in [1usize, 2] {
            let step = if m == 1 { 0.002 } else { 0.02 };
            let spec = GridSpec::cube(-2.0, 2.0, 2 * m, step)?.with_max_points(2_000_000_000);
            let (val, point) = grid_minimize(
                |w| lower_bound_objective(&w[..m], &w[m..], lambda).unwrap(),
                &spec,
            )?;
            let g = penalized_optimum(lambda, m);
            let c = pattern_magnitude(lambda, m);
            let near_pattern = (0..1u64 << m).any(|mask| {
                let p = pattern_point(m, c, mask);
                point
                    .iter()
                    .zip(p.coords())
                    .all(|(a, b)| (a - b).abs() <= step + 1e-12)
            });
            checks.push(Check {
                suite: "pattern-structure",
                check: format!("global-grid-minimum-is-a-pattern-m{m}-lambda-{lambda}"),
                pass: (val - g).abs() <= 1e-3 && near_pattern,
                details: json!({
                    "m": m,
                    "lambda": lambda,
                    "step": step,
                    "grid_minimum": val,
                    "expected": g,
                    "argmin": point,
                }),
            });
        }
    }
    Ok(checks)
}

fn escape_box(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut s = 7000u64.wrapping_add(seed.wrapping_mul(10_000));
    for m in [2usize, 4, 8] {
        for lambda in LAMBDAS {
            s += 1;
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let set = random_multiset(m, 0, 50, &mut rng);
            let inst = build_instance(&set, &ReductionParams::up(lambda)?)?;
            let pass = check_escape_box(&inst, 10_000, s ^ 0x5eed)?;
            checks.push(Check {
                suite: "escape-box",
                check: format!("objective-exceeds-zero-value-outside-box-m{m}-lambda-{lambda}"),
                pass,
                details: json!({
                    "m": m,
                    "lambda": lambda,
                    "elements": set.elements(),
                    "samples": 10_000,
                }),
            });
        }
    }
    Ok(checks)
}
