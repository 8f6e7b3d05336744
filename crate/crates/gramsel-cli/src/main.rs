//! `gramsel` — compute controllability Gramians of linear network systems
//! and solve the two energy-aware actuator-placement problems from the
//! command line.
//!
//! Exit codes: 0 success, 2 infeasible problem, 3 invalid input,
//! 4 numerical certification failure.

mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{CliError, EXIT_INVALID_INPUT, EXIT_OK};

#[derive(Parser)]
#[command(
    name = "gramsel",
    version,
    about = "Controllability Gramians and energy-constrained actuator placement"
)]
struct Cli {
    /// JSON config file providing default solver parameters
    /// (fields: c, a0, a0p, eps, lazy). Flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute per-node Gramians for an instance and write a cache file.
    Gramians(GramiansArgs),
    /// Select a minimal actuator set subject to an average-energy bound.
    PlaceMin(PlaceMinArgs),
    /// Select a minimum-energy actuator set subject to a size budget.
    PlaceBudget(PlaceBudgetArgs),
    /// Run a property-verification suite against a Gramian cache.
    Verify(VerifyArgs),
    /// Reproduce the experiment sweeps; writes CSV and JSON outputs.
    Bench(BenchArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    /// Block-exponential integration of the finite-horizon integral.
    Finite,
    /// Lyapunov solve for the infinite-horizon Gramian (Hurwitz systems).
    Infinite,
}

#[derive(Args)]
struct GramiansArgs {
    /// Instance descriptor JSON: {"type":"chain"|"er"|"hitting_set", ...}.
    #[arg(long, value_name = "FILE", conflicts_with = "system", required_unless_present = "system")]
    instance: Option<PathBuf>,
    /// Raw system JSON: {"n", "A", "horizon"}.
    #[arg(long, value_name = "FILE")]
    system: Option<PathBuf>,
    /// Destination cache file.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Expected integration method; errors if it conflicts with the
    /// system's horizon (the horizon alone determines the method).
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
}

#[derive(Args)]
struct PlaceMinArgs {
    /// Gramian cache produced by `gramsel gramians`.
    #[arg(long, value_name = "FILE")]
    cache: PathBuf,
    /// Average-energy bound E on tr(W_Δ⁻¹).
    #[arg(long = "E", value_name = "BOUND")]
    e_bound: f64,
    /// Certification slack: accept tr(W_Δ⁻¹) ≤ (1+c)·E.
    #[arg(long)]
    c: Option<f64>,
    /// Initial accuracy of the ε bisection.
    #[arg(long)]
    a0: Option<f64>,
    /// Use the lazy (stale-bound) greedy scan.
    #[arg(long)]
    lazy: bool,
    /// Also write the run record to this file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlaceBudgetArgs {
    /// Gramian cache produced by `gramsel gramians`.
    #[arg(long, value_name = "FILE")]
    cache: PathBuf,
    /// Actuator budget r.
    #[arg(long)]
    r: usize,
    /// Certification slack of the inner solver.
    #[arg(long)]
    c: Option<f64>,
    /// Initial accuracy of the inner ε bisection.
    #[arg(long)]
    a0: Option<f64>,
    /// Accuracy of the outer energy bisection.
    #[arg(long)]
    a0p: Option<f64>,
    /// Use the lazy (stale-bound) greedy scan.
    #[arg(long)]
    lazy: bool,
    /// Known controllable fallback set, e.g. "1,3"; auto-generated when
    /// omitted.
    #[arg(long, value_name = "NODES")]
    delta_c: Option<String>,
    /// Also write the run record to this file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    /// Diminishing-returns inequality of the ε-perturbed metric.
    Supermodularity,
    /// Solver certificates against the exhaustive oracle (n ≤ 12).
    Oracle,
    /// Per-run greedy cardinality guarantee (n ≤ 12).
    Fact1,
    /// Naive budget greedy's additive bound (n ≤ 12).
    Fact2,
}

#[derive(Args)]
struct VerifyArgs {
    /// Gramian cache to verify.
    #[arg(long, value_name = "FILE")]
    cache: PathBuf,
    /// Which property suite to run.
    #[arg(long, value_enum)]
    suite: SuiteArg,
    /// Number of sampled cases (default: 1000 for supermodularity, 20
    /// otherwise).
    #[arg(long)]
    samples: Option<usize>,
    /// RNG seed for the sampler.
    #[arg(long)]
    seed: Option<u64>,
    /// Base perturbation for the fact2 suite (sampled around it).
    #[arg(long)]
    eps: Option<f64>,
    /// Also write the report to this file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory for the CSV/JSON outputs (created if missing).
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Random-network sizes to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [10usize, 40])]
    n: Vec<usize>,
    /// Seed for the random networks.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Largest doubling exponent in the energy sweep (k = 2^1 .. 2^max).
    #[arg(long, default_value_t = 50)]
    max_doubling: u32,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help or version that was explicitly asked for is a success;
            // help shown because arguments were missing is invalid input.
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INVALID_INPUT,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    if let Err(err) = init_worker_pool() {
        eprintln!("error: {err}");
        return ExitCode::from(err.exit_code());
    }

    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

/// Honors `GRAMSEL_WORKERS` by sizing the global rayon pool before any
/// parallel work runs.
fn init_worker_pool() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("GRAMSEL_WORKERS") else {
        return Ok(());
    };
    let workers: usize = raw
        .parse()
        .ok()
        .filter(|&w| w >= 1)
        .ok_or_else(|| CliError::Usage(format!("GRAMSEL_WORKERS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CliError::Usage(format!("could not size the worker pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let params = config::resolve(cli.config.as_deref())?;
    match cli.command {
        Command::Gramians(args) => commands::gramians::run(&args),
        Command::PlaceMin(args) => commands::place::run_min(&args, &params),
        Command::PlaceBudget(args) => commands::place::run_budget(&args, &params),
        Command::Verify(args) => commands::verify::run(&args, &params),
        Command::Bench(args) => commands::bench::run(&args),
    }
}
