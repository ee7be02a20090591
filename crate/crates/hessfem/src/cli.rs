//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 when a verification check misses its
//! tolerance or a run fails at runtime, 2 on usage errors.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use hessfem_core::bench::{
    benchmark_mesh, initial_guess, make_benchmark, run_fd_comparison, run_mode_check, run_optimizer,
    run_taylor_test, sample_rng, standard_normal, Benchmark, BenchError, BenchmarkName, BenchmarkSpec,
    FdReport, ModeReport, OptimizerKind, TaylorReport, TaylorSlopes,
};
use hessfem_core::implicit::SolverSettings;
use hessfem_core::optimize::{Clock, NullClock, OptimizeSettings, Status};
use serde::{Deserialize, Serialize};

use crate::io;

/// Largest `e_v` accepted at `h = 0.1`.
pub const MAX_E_V: f64 = 2e-3;
/// Largest `e_s` accepted at `h = 0.1`.
pub const MAX_E_S: f64 = 4e-2;
/// Allowed distance of a fitted Taylor slope from its order.
pub const SLOPE_TOL: f64 = 0.1;
/// Largest pairwise relative difference between composition modes.
pub const MODE_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "hessfem", version, about = "Implicit Hessians for finite-element inverse problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derivative verification protocols.
    #[command(subcommand)]
    Verify(Verify),
    /// Solve an inverse problem with one optimizer.
    Optimize(OptimizeArgs),
}

#[derive(Debug, Subcommand)]
pub enum Verify {
    /// Compare Hessian-vector products with central differences of gradients.
    Fd(FdArgs),
    /// Taylor remainder orders of the reduced objective.
    Taylor(TaylorArgs),
    /// Agreement of the three second-order composition modes.
    Modes(ModesArgs),
}

fn parse_benchmark(s: &str) -> Result<BenchmarkName, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

fn parse_non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a non-negative number")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// model-nonlinear-id or source-id
    #[arg(long, value_parser = parse_benchmark)]
    pub problem: BenchmarkName,
    /// Elements per side of the unit square.
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u32).range(1..=512))]
    pub mesh: u32,
    /// Regularization weight.
    #[arg(long, default_value_t = 1e-6, value_parser = parse_non_negative)]
    pub alpha: f64,
}

impl ProblemArgs {
    fn build(&self) -> Result<(Benchmark, BenchmarkSpec)> {
        let n = self.mesh as usize;
        Ok(make_benchmark(self.problem, n, n, self.alpha)?)
    }
}

#[derive(Debug, Args)]
pub struct FdArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Comma-separated finite-difference steps.
    #[arg(long = "h", value_delimiter = ',', default_value = "1e-4,1e-3,1e-2,1e-1", value_parser = parse_positive)]
    pub h: Vec<f64>,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub samples: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Line-delimited JSON records (a CSV mirror is written next to it).
    /// Records go to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TaylorArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Comma-separated perturbation scales.
    #[arg(long, value_delimiter = ',', default_value = "1e-4,1e-3,1e-2,1e-1", value_parser = parse_positive)]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModesArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    pub samples: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report; printed to stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// lbfgs, newton-cg-ad or newton-cg-fd
    #[arg(long, value_parser = parse_optimizer)]
    pub optimizer: OptimizerKind,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// Stop when the max-norm of the gradient reaches this.
    #[arg(long, default_value_t = 1e-12, value_parser = parse_non_negative)]
    pub grad_tol: f64,
    /// Seed of the initial-guess noise (model-nonlinear-id only).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Record zero elapsed time so logs are bit-reproducible.
    #[arg(long)]
    pub no_timing: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    /// A verification check missed its tolerance.
    Fail,
}

impl Outcome {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 1,
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = matches!(e.downcast_ref::<BenchError>(), Some(BenchError::Invalid(_)));
            if usage {
                2
            } else {
                1
            }
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Verify(Verify::Fd(a)) => verify_fd(a),
        Command::Verify(Verify::Taylor(a)) => verify_taylor(a),
        Command::Verify(Verify::Modes(a)) => verify_modes(a),
        Command::Optimize(a) => optimize(a),
    }
}

/// Checks an FD report against the acceptance tolerances for whichever of
/// `h = 0.1`, `0.01`, `0.001` it contains.
pub fn check_fd(report: &FdReport) -> bool {
    let mut ok = true;
    if let Some(v) = report.max_e_v(0.1) {
        ok &= v <= MAX_E_V;
    }
    if let Some(s) = report.max_e_s(0.1) {
        ok &= s <= MAX_E_S;
    }
    let medians: Vec<f64> = [1e-1, 1e-2, 1e-3]
        .iter()
        .filter_map(|&h| report.median_e_v(h))
        .collect();
    ok &= medians.windows(2).all(|w| w[1] < w[0]);
    ok
}

fn verify_fd(a: &FdArgs) -> Result<Outcome> {
    let (p, _) = a.problem.build()?;
    let report = run_fd_comparison(&p, &a.h, a.samples as usize, a.seed)?;
    match &a.out {
        Some(path) => {
            io::write_jsonl(path, &report.records)?;
            io::write_csv(&path.with_extension("csv"), &report.records)?;
        }
        None => io::write_jsonl_to(&mut std::io::stdout().lock(), &report.records)?,
    }
    for &h in &a.h {
        eprintln!(
            "h={h:e} median_e_v={} max_e_v={} max_e_s={}",
            Opt(report.median_e_v(h)),
            Opt(report.max_e_v(h)),
            Opt(report.max_e_s(h))
        );
    }
    let pass = check_fd(&report);
    eprintln!(
        "skipped={} fd check: {}",
        report.skipped,
        if pass { "pass" } else { "fail" }
    );
    Ok(Outcome::from_pass(pass))
}

struct Opt(Option<f64>);

impl fmt::Display for Opt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v:.3e}"),
            None => f.write_str("n/a"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaylorOutput {
    pub problem: BenchmarkName,
    pub mesh: u32,
    pub seed: u64,
    #[serde(flatten)]
    pub report: TaylorReport,
}

/// Slopes within [`SLOPE_TOL`] of 1, 2, 3. A missing slope means every
/// remainder of that order was at round-off level, which is accepted.
pub fn check_slopes(s: &TaylorSlopes) -> bool {
    [(s.zeroth, 1.0), (s.first, 2.0), (s.second, 3.0)]
        .iter()
        .all(|(slope, order)| slope.is_none_or(|v| (v - order).abs() <= SLOPE_TOL))
}

/// Random point and direction used by the Taylor check for `seed`.
pub fn taylor_draw(m: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = sample_rng(seed, 0);
    let theta = standard_normal(&mut rng, m);
    let dir = standard_normal(&mut rng, m);
    (theta, dir)
}

fn verify_taylor(a: &TaylorArgs) -> Result<Outcome> {
    let (p, _) = a.problem.build()?;
    let (theta, dir) = taylor_draw(p.n_params(), a.seed);
    let report = run_taylor_test(&p, &theta, &dir, &a.eps)?;
    let pass = check_slopes(&report.slopes);
    let out = TaylorOutput {
        problem: a.problem.problem,
        mesh: a.problem.mesh,
        seed: a.seed,
        report,
    };
    match &a.out {
        Some(path) => io::write_json(path, &out)?,
        None => println!("{}", serde_json::to_string_pretty(&out)?),
    }
    let s = out.report.slopes;
    eprintln!(
        "slopes zeroth={} first={} second={} taylor check: {}",
        Opt(s.zeroth),
        Opt(s.first),
        Opt(s.second),
        if pass { "pass" } else { "fail" }
    );
    Ok(Outcome::from_pass(pass))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModesOutput {
    pub problem: BenchmarkName,
    pub mesh: u32,
    pub seed: u64,
    #[serde(flatten)]
    pub report: ModeReport,
}

fn verify_modes(a: &ModesArgs) -> Result<Outcome> {
    let (p, _) = a.problem.build()?;
    let report = run_mode_check(&p, a.samples as usize, a.seed)?;
    let pass = report.max <= MODE_TOL;
    let out = ModesOutput {
        problem: a.problem.problem,
        mesh: a.problem.mesh,
        seed: a.seed,
        report,
    };
    match &a.out {
        Some(path) => io::write_json(path, &out)?,
        None => println!("{}", serde_json::to_string(&out)?),
    }
    eprintln!(
        "max pairwise difference {:.3e} modes check: {}",
        out.report.max,
        if pass { "pass" } else { "fail" }
    );
    Ok(Outcome::from_pass(pass))
}

/// Wall-clock time since construction.
#[derive(Debug, Clone, Copy)]
pub struct StdClock(Instant);

impl StdClock {
    pub fn start() -> Self {
        StdClock(Instant::now())
    }
}

impl Clock for StdClock {
    fn elapsed_s(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Files written by an optimization run, relative to its directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutputs {
    pub iterations_jsonl: String,
    pub iterations_csv: String,
    pub parameters: String,
    pub reference: String,
    pub predicted: String,
    pub observed: String,
    pub nodes: String,
    pub elements: String,
}

/// Everything needed to repeat an optimization run, plus its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub benchmark: BenchmarkName,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub nx: usize,
    pub ny: usize,
    pub alpha: f64,
    pub settings: OptimizeSettings,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// SHA-256 of the observation the run was fitted to.
    pub observation_sha256: String,
    pub status: Status,
    pub message: Option<String>,
    pub iterations: usize,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub parameter_error: f64,
    pub outputs: RunOutputs,
}

fn optimize(a: &OptimizeArgs) -> Result<Outcome> {
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let (p, spec) = a.problem.build()?;
    let settings = OptimizeSettings {
        max_iter: a.max_iter,
        grad_tol: a.grad_tol,
        ..OptimizeSettings::default()
    };
    let theta0 = initial_guess(spec.name, p.n_params(), a.seed);
    let initial_objective = p.objective(&theta0)?;
    let wall = StdClock::start();
    let clock: &dyn Clock = if a.no_timing { &NullClock } else { &wall };
    let run = run_optimizer(&p, &spec, a.optimizer, &theta0, &settings, clock)?;

    let digest = io::field_digest(&spec.observed);
    let outputs = RunOutputs {
        iterations_jsonl: "iterations.jsonl".into(),
        iterations_csv: "iterations.csv".into(),
        parameters: "parameters.txt".into(),
        reference: "reference.txt".into(),
        predicted: "predicted.txt".into(),
        observed: format!("observed-{}.txt", &digest[..16]),
        nodes: "nodes.txt".into(),
        elements: "elements.txt".into(),
    };
    let dir = &a.out;
    let at = |name: &str| -> PathBuf { dir.join(name) };
    io::write_jsonl(&at(&outputs.iterations_jsonl), &run.result.records)?;
    io::write_csv(&at(&outputs.iterations_csv), &run.result.records)?;
    io::write_field(&at(&outputs.parameters), &run.result.x)?;
    io::write_field(&at(&outputs.reference), &spec.reference)?;
    io::write_field(&at(&outputs.predicted), &run.predicted)?;
    io::write_field(&at(&outputs.observed), &spec.observed)?;
    io::write_mesh(&at(&outputs.nodes), &at(&outputs.elements), &benchmark_mesh(spec.nx, spec.ny)?)?;

    let solver = SolverSettings::default();
    let manifest = RunManifest {
        benchmark: spec.name,
        optimizer: a.optimizer,
        seed: a.seed,
        nx: spec.nx,
        ny: spec.ny,
        alpha: spec.alpha,
        settings,
        newton_tol: solver.newton_tol,
        newton_max_iter: solver.newton_max_iter,
        observation_sha256: digest,
        status: run.result.status,
        message: run.result.message.clone(),
        iterations: run.result.records.len() - 1,
        initial_objective,
        final_objective: run.result.objective,
        parameter_error: run.parameter_error,
        outputs,
    };
    io::write_json(&dir.join("manifest.json"), &manifest)?;
    print_run_summary(&manifest, dir);
    Ok(Outcome::Pass)
}

fn print_run_summary(m: &RunManifest, dir: &Path) {
    eprintln!(
        "{} on {}: status={:?} iterations={} objective {:.3e} -> {:.3e} parameter_error={:.3e} ({})",
        m.optimizer,
        m.benchmark,
        m.status,
        m.iterations,
        m.initial_objective,
        m.final_objective,
        m.parameter_error,
        dir.display()
    );
}
