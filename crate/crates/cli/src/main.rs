//! `l12lab`: build reduction instances from integer multisets, minimize them
//! numerically or exactly over patterns, decide equal-sum splits through the
//! optimization lens, and run the verification suites.
//!
//! Exit codes: 0 success (YES for decisions), 1 NO or verification failure,
//! 2 usage or internal error. Human output rounds to ten digits; the last
//! stdout line of each command is a full-precision JSON object.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use l12lab::model::{eval_objective, CandidatePoint, PartitionInstance, ProblemKind};
use l12lab::oracles::{
    brute_force_partition, check_gw_unique_minimizer, enumerate_pattern_minimum, grid_minimize,
    eval_h_t, kkt_residual_nup, GridSpec,
};
use l12lab::reduction::{
    closed_form_targets, decide_partition_with, pattern_magnitude, penalized_optimum, Answer,
    DecideConfig, DecideMethod, ReductionParams,
};
use l12lab::solvers::{multi_start_solve, InitStrategy, SolverOptions};
use l12lab_cli::format::InstanceFile;
use l12lab_cli::record::{self, RunRecord};
use l12lab_cli::suites;

#[derive(Parser)]
#[command(
    name = "l12lab",
    version,
    about = "Equal-sum set splitting through sparse reconstruction: generate reduction \
             instances, solve them, decide splits, verify the closed forms"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write an instance file for a multiset and print its closed-form targets
    Gen(GenArgs),
    /// Minimize an instance file with a chosen method
    Solve(SolveArgs),
    /// Decide whether a multiset splits into two equal-sum halves (exit 0 YES, 1 NO)
    Decide(DecideArgs),
    /// Run a single oracle computation
    Oracle {
        #[command(subcommand)]
        cmd: OracleCmd,
    },
    /// Run a named verification suite (exit 0 iff every check passes)
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Comma-separated integer multiset, e.g. 3,1,4
    #[arg(long, allow_hyphen_values = true)]
    set: String,
    /// Problem kind: cp, ncp, up, nup, pqp
    #[arg(long)]
    kind: String,
    /// Regularization coefficient for cp/ncp
    #[arg(long)]
    tau: Option<f64>,
    /// Regularization weight for up/nup
    #[arg(long)]
    lambda: Option<f64>,
    /// Output path (default <kind>-m<size>.json)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Append a run record to l12lab-runs.jsonl in the current directory
    #[arg(long)]
    log: bool,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file to read
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    /// dca | penalty | pattern | grid
    #[arg(long)]
    method: String,
    /// Number of multi-start runs for dca/penalty (default 50)
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid step for --method grid (default 0.1)
    #[arg(long)]
    tol: Option<f64>,
    /// Append a run record to l12lab-runs.jsonl in the current directory
    #[arg(long)]
    log: bool,
}

#[derive(Args)]
struct DecideArgs {
    /// Comma-separated integer multiset
    #[arg(long, allow_hyphen_values = true)]
    set: String,
    /// Problem kind to reduce through: cp, ncp, up, nup, pqp
    #[arg(long)]
    kind: String,
    /// Regularization coefficient for cp/ncp
    #[arg(long)]
    tau: Option<f64>,
    /// Regularization weight for up/nup
    #[arg(long)]
    lambda: Option<f64>,
    /// pattern (exact both ways) | solver (YES certified, NO inconclusive)
    #[arg(long, default_value = "pattern")]
    method: String,
    /// Value and certificate-decoding tolerance
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Solver starts for --method solver (default 50)
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Append a run record to l12lab-runs.jsonl in the current directory
    #[arg(long)]
    log: bool,
}

#[derive(Subcommand)]
enum OracleCmd {
    /// Exhaustive balanced-split search (exit 0 found, 1 none)
    Partition {
        /// Comma-separated integer multiset
        #[arg(long, allow_hyphen_values = true)]
        set: String,
    },
    /// Grid scan of a penalized reduction instance over its escape box
    Grid {
        /// Comma-separated integer multiset
        #[arg(long, allow_hyphen_values = true)]
        set: String,
        /// up | nup
        #[arg(long)]
        kind: String,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
        /// Grid step (default 0.1)
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Unique-minimizer check for the reduced k-coordinate objective
    Gw {
        #[arg(long)]
        tau: f64,
        /// Ambient coordinate count
        #[arg(long)]
        m: usize,
        /// Active coordinates in the scan
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Grid step (default 1e-3 for k=1, 1e-2 for k=2, 0.05 beyond)
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Stationarity and value at the closed-form diagonal point
    Kkt {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        m: usize,
    },
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite name: quadratic, constrained, constrained-nonneg, penalized,
    /// penalized-nonneg, origin-minimizer, diagonal-optimum,
    /// pattern-structure, escape-box, all
    #[arg(long)]
    suite: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    // die quietly when a pipeline consumer closes early, like any unix tool;
    // the Rust runtime ignores SIGPIPE, which turns `l12lab ... | head` into
    // a printing panic otherwise
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    cap_threads();
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn cap_threads() {
    if let Ok(v) = std::env::var("L12LAB_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring L12LAB_THREADS={v} (want a positive integer)"),
        }
    }
}

fn run(cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Decide(a) => cmd_decide(a),
        Cmd::Oracle { cmd } => cmd_oracle(cmd),
        Cmd::Verify(a) => cmd_verify(a),
    }
}

/// Ten digits after the point; matches the documented human output width.
fn fmt10(x: f64) -> String {
    format!("{x:.10}")
}

/// Scientific with ten significant digits, for small diagnostics.
fn sci10(x: f64) -> String {
    format!("{x:.9e}")
}

fn coords10(coords: &[f64]) -> String {
    let parts: Vec<String> = coords.iter().map(|&c| fmt10(c)).collect();
    format!("[{}]", parts.join(", "))
}

fn parse_set(text: &str) -> Result<Vec<i64>> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        bail!("--set must list at least one integer");
    }
    trimmed
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<i64>()
                .with_context(|| format!("bad multiset entry `{part}`"))
        })
        .collect()
}

fn reduction_params(kind_text: &str, tau: Option<f64>, lambda: Option<f64>) -> Result<ReductionParams> {
    let kind = ProblemKind::parse(kind_text)?;
    if kind == ProblemKind::Generic {
        bail!("this command takes a reduction kind (cp, ncp, up, nup, pqp)");
    }
    Ok(ReductionParams::for_kind(kind, tau, lambda)?)
}

fn maybe_log(
    enabled: bool,
    command: &str,
    digest: String,
    options: serde_json::Value,
    seed: u64,
    results: &serde_json::Value,
    started: Instant,
) -> Result<()> {
    if !enabled {
        return Ok(());
    }
    let rec = RunRecord {
        command: command.to_string(),
        instance_digest: digest,
        options,
        seed,
        results: results.clone(),
        wall_ms: started.elapsed().as_millis() as u64,
    };
    let path = record::append(Path::new("."), &rec)?;
    eprintln!("logged to {}", path.display());
    Ok(())
}

fn cmd_gen(a: GenArgs) -> Result<u8> {
    let started = Instant::now();
    let set = parse_set(&a.set)?;
    let params = reduction_params(&a.kind, a.tau, a.lambda)?;
    let s = PartitionInstance::new(set)?;
    let file = InstanceFile::for_reduction(&s, &params);
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}-m{}.json", params.kind().name(), s.len())));
    fs::write(&out, file.canonical_json())
        .with_context(|| format!("writing {}", out.display()))?;

    let t = closed_form_targets(s.len(), &params)?;
    println!("kind {}  m {}", params.kind().name(), s.len());
    println!("pattern magnitude {}", fmt10(t.pattern_magnitude));
    println!("target value {}", fmt10(t.target_value));
    if let Some(z) = t.zero_point_value {
        println!("zero point value {}", fmt10(z));
    }
    if let Some(b) = t.escape_box {
        println!("escape box bound {}", fmt10(b));
    }
    println!("wrote {}", out.display());
    let machine = json!({
        "command": "gen",
        "path": out,
        "digest": file.digest(),
        "kind": params.kind().name(),
        "m": s.len(),
        "targets": {
            "pattern_magnitude": t.pattern_magnitude,
            "target_value": t.target_value,
            "zero_point_value": t.zero_point_value,
            "escape_box": t.escape_box,
        },
    });
    println!("{machine}");
    maybe_log(
        a.log,
        "gen",
        file.digest(),
        json!({"set": a.set, "kind": a.kind, "tau": a.tau, "lambda": a.lambda, "out": out}),
        0,
        &machine,
        started,
    )?;
    Ok(0)
}

fn cmd_solve(a: SolveArgs) -> Result<u8> {
    let started = Instant::now();
    let text = fs::read_to_string(&a.input)
        .with_context(|| format!("reading {}", a.input.display()))?;
    let file = InstanceFile::parse(&text)?;
    let (inst, params) = file.build()?;
    let target = match (&params, inst.source()) {
        (Some(p), Some(s)) => Some(closed_form_targets(s.len(), p)?.target_value),
        _ => None,
    };

    let machine = match a.method.as_str() {
        "pattern" => {
            if inst.source().is_none() {
                bail!("method pattern enumerates reduction patterns; this instance has no source multiset");
            }
            let pm = enumerate_pattern_minimum(&inst)?;
            println!("pattern minimum {}", fmt10(pm.value));
            println!(
                "balance-feasible {}  minimum imbalance {}",
                pm.feasible, pm.min_imbalance
            );
            println!("argmin patterns {}", pm.argmin_count);
            if let Some(t) = target {
                println!("gap to target {}", fmt10(pm.value - t));
            }
            json!({
                "command": "solve",
                "method": "pattern",
                "value": pm.value,
                "feasible": pm.feasible,
                "min_imbalance": pm.min_imbalance.to_string(),
                "argmin_count": pm.argmin_count,
                "argmin_masks": pm.argmin_masks.iter().take(16).collect::<Vec<_>>(),
                "target": target,
                "gap": target.map(|t| pm.value - t),
            })
        }
        "dca" | "penalty" => {
            let constrained = inst.kind().is_equality_constrained();
            if a.method == "dca" && constrained {
                bail!(
                    "method dca handles the penalized kinds; {} goes through penalty",
                    inst.kind()
                );
            }
            if a.method == "penalty" && !constrained {
                bail!(
                    "method penalty handles the equality-constrained kinds; {} goes through dca",
                    inst.kind()
                );
            }
            let opts = SolverOptions {
                n_starts: a.starts.unwrap_or(50),
                seed: a.seed,
                init: if inst.source().is_some() {
                    InitStrategy::PerturbedPattern
                } else {
                    InitStrategy::RandomBox
                },
                ..SolverOptions::default()
            };
            let rep = multi_start_solve(&inst, &opts)?;
            println!("best value {}", fmt10(rep.best_value));
            println!("best point {}", coords10(rep.best_point.coords()));
            println!(
                "converged {}  outer iterations {}  starts {}",
                rep.converged,
                rep.outer_iterations,
                rep.per_start_values.len()
            );
            println!(
                "equality residual {}  nonneg violation {}  criticality {}",
                sci10(rep.feasibility.equality_residual),
                sci10(rep.feasibility.nonneg_violation),
                sci10(rep.criticality_residual)
            );
            if let Some(t) = target {
                println!("gap to target {}", fmt10(rep.best_value - t));
            }
            json!({
                "command": "solve",
                "method": a.method,
                "target": target,
                "gap": target.map(|t| rep.best_value - t),
                "report": rep,
            })
        }
        "grid" => {
            if inst.kind().is_equality_constrained() {
                bail!(
                    "method grid scans the unconstrained objective; {} needs penalty or pattern",
                    inst.kind()
                );
            }
            let bound = match (&params, inst.source()) {
                (Some(p), Some(s)) => closed_form_targets(s.len(), p)?
                    .escape_box
                    .unwrap_or(2.0),
                _ => 2.0,
            };
            let lo = if inst.nonneg() { 0.0 } else { -bound };
            let step = a.tol.unwrap_or(0.1);
            // one-shot explicit scans may run big; the cap still refuses
            // anything that could not finish in minutes
            let spec = GridSpec::new(vec![lo; inst.dim()], vec![bound; inst.dim()], step)?
                .with_max_points(4_000_000_000);
            let (val, point) = grid_minimize(
                |w| {
                    let p = CandidatePoint::new(w.to_vec()).expect("grid points are finite");
                    eval_objective(&inst, &p).expect("grid dimension matches the instance")
                },
                &spec,
            )?;
            println!("grid minimum {}", fmt10(val));
            println!("argmin {}", coords10(&point));
            if let Some(t) = target {
                println!("gap to target {}", fmt10(val - t));
            }
            json!({
                "command": "solve",
                "method": "grid",
                "value": val,
                "argmin": point,
                "step": step,
                "box": [lo, bound],
                "target": target,
                "gap": target.map(|t| val - t),
            })
        }
        other => bail!("unknown method `{other}` (dca, penalty, pattern, grid)"),
    };
    println!("{machine}");
    maybe_log(
        a.log,
        "solve",
        file.digest(),
        json!({"in": a.input, "method": a.method, "starts": a.starts, "tol": a.tol}),
        a.seed,
        &machine,
        started,
    )?;
    Ok(0)
}

fn cmd_decide(a: DecideArgs) -> Result<u8> {
    let started = Instant::now();
    let set = parse_set(&a.set)?;
    let params = reduction_params(&a.kind, a.tau, a.lambda)?;
    let s = PartitionInstance::new(set)?;
    let method = match a.method.as_str() {
        "pattern" => DecideMethod::Pattern,
        "solver" => DecideMethod::Solver,
        other => bail!("unknown method `{other}` (pattern, solver)"),
    };
    let mut cfg = DecideConfig {
        tol: a.tol,
        ..DecideConfig::default()
    };
    if let Some(n) = a.starts {
        cfg.solver.n_starts = n;
    }
    cfg.solver.seed = a.seed;
    let d = decide_partition_with(&s, &params, method, &cfg)?;

    println!("{}", d.answer);
    if let Some(cert) = &d.certificate {
        let (s1, s2) = cert.subsets(&s);
        println!("certificate: {s1:?} | {s2:?}");
        println!("subset sums: {} | {}", cert.sum1, cert.sum2);
    }
    println!(
        "achieved {}  target {}  gap {}",
        fmt10(d.achieved_value),
        fmt10(d.target_value),
        fmt10(d.gap)
    );
    let machine = json!({
        "command": "decide",
        "kind": params.kind().name(),
        "tau": params.tau(),
        "lambda": params.lambda(),
        "method": a.method,
        "decision": d,
    });
    println!("{machine}");
    maybe_log(
        a.log,
        "decide",
        InstanceFile::for_reduction(&s, &params).digest(),
        json!({"set": a.set, "kind": a.kind, "tau": a.tau, "lambda": a.lambda, "method": a.method, "tol": a.tol, "starts": a.starts}),
        a.seed,
        &machine,
        started,
    )?;
    Ok(if d.answer == Answer::Yes { 0 } else { 1 })
}

fn cmd_oracle(cmd: OracleCmd) -> Result<u8> {
    match cmd {
        OracleCmd::Partition { set } => {
            let s = PartitionInstance::new(parse_set(&set)?)?;
            match brute_force_partition(&s)? {
                Some(cert) => {
                    let (s1, s2) = cert.subsets(&s);
                    println!("balanced split exists");
                    println!("certificate: {s1:?} | {s2:?}");
                    println!("subset sums: {} | {}", cert.sum1, cert.sum2);
                    println!(
                        "{}",
                        json!({"command": "oracle-partition", "balanced": true, "certificate": cert})
                    );
                    Ok(0)
                }
                None => {
                    println!("no balanced split");
                    println!("{}", json!({"command": "oracle-partition", "balanced": false}));
                    Ok(1)
                }
            }
        }
        OracleCmd::Grid {
            set,
            kind,
            lambda,
            tau,
            tol,
        } => {
            let params = reduction_params(&kind, tau, lambda)?;
            if !matches!(params.kind(), ProblemKind::Up | ProblemKind::Nup) {
                bail!("oracle grid scans the penalized kinds (up, nup) over their escape box");
            }
            let s = PartitionInstance::new(parse_set(&set)?)?;
            let inst = l12lab::reduction::build_instance(&s, &params)?;
            let t = closed_form_targets(s.len(), &params)?;
            let bound = t.escape_box.expect("penalized kinds have an escape box");
            let lo = if inst.nonneg() { 0.0 } else { -bound };
            let step = tol.unwrap_or(0.1);
            let spec = GridSpec::new(vec![lo; inst.dim()], vec![bound; inst.dim()], step)?
                .with_max_points(4_000_000_000);
            let (val, point) = grid_minimize(
                |w| {
                    let p = CandidatePoint::new(w.to_vec()).expect("grid points are finite");
                    eval_objective(&inst, &p).expect("grid dimension matches the instance")
                },
                &spec,
            )?;
            println!("grid minimum {}", fmt10(val));
            println!("argmin {}", coords10(&point));
            println!("gap to target {}", fmt10(val - t.target_value));
            println!(
                "{}",
                json!({
                    "command": "oracle-grid",
                    "value": val,
                    "argmin": point,
                    "step": step,
                    "target": t.target_value,
                    "gap": val - t.target_value,
                })
            );
            Ok(0)
        }
        OracleCmd::Gw { tau, m, k, seed, tol } => {
            let step = tol.unwrap_or(match k {
                1 => 1e-3,
                2 => 1e-2,
                _ => 0.05,
            });
            let spec = GridSpec::cube(-3.0, 3.0, k, step)?;
            let rep = check_gw_unique_minimizer(tau, m, k, &spec, 100, seed)?;
            println!(
                "unique minimizer at origin: {}",
                if rep.converged_to_origin { "PASS" } else { "FAIL" }
            );
            println!("grid argmin {}", coords10(&rep.point));
            println!("objective there {}", fmt10(rep.objective));
            println!("worst endpoint gradient {}", sci10(rep.gradient_norm));
            println!(
                "{}",
                json!({"command": "oracle-gw", "tau": tau, "m": m, "k": k, "step": step, "report": rep})
            );
            Ok(if rep.converged_to_origin { 0 } else { 1 })
        }
        OracleCmd::Kkt { lambda, m } => {
            let c = pattern_magnitude(lambda, m);
            let t = vec![c; m];
            let residual = kkt_residual_nup(&t, lambda)?;
            let value = eval_h_t(&t, lambda)?;
            let expected = penalized_optimum(lambda, m);
            let pass = residual <= 1e-12 && (value - expected).abs() <= 1e-12;
            println!(
                "stationary at the diagonal point: {}",
                if pass { "PASS" } else { "FAIL" }
            );
            println!("coordinate {}", fmt10(c));
            println!("stationarity residual {}", sci10(residual));
            println!(
                "value {}  expected {}",
                fmt10(value),
                fmt10(expected)
            );
            println!(
                "{}",
                json!({
                    "command": "oracle-kkt",
                    "lambda": lambda,
                    "m": m,
                    "coordinate": c,
                    "residual": residual,
                    "value": value,
                    "expected": expected,
                    "pass": pass,
                })
            );
            Ok(if pass { 0 } else { 1 })
        }
    }
}

fn cmd_verify(a: VerifyArgs) -> Result<u8> {
    let checks = suites::run_suite(&a.suite, a.seed)?;
    let mut all = true;
    for check in &checks {
        all &= check.pass;
        println!("{}", serde_json::to_string(check)?);
    }
    println!(
        "suite {}: {} checks, {}",
        a.suite,
        checks.len(),
        if all { "all pass" } else { "FAILED" }
    );
    Ok(if all { 0 } else { 1 })
}
