//! `ccvm`: generate, certify, solve and benchmark BoxQP instances.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ccvm_core::Error;

/// Default output directory when `--out-dir`/`--out` is not given.
pub const OUT_DIR_ENV: &str = "BOXQP_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "ccvm",
    version,
    about = "Stochastic-dynamics solvers for box-constrained quadratic programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write random instances `<N>-<D%>-<S>.boxqp`.
    Generate(GenerateArgs),
    /// Compute the exact optimum of an instance and store it in the file.
    Certify(CertifyArgs),
    /// Run a batch of trials of one solver on one instance.
    Solve(SolveArgs),
    /// Benchmark solvers on every certified instance in a directory.
    Bench(BenchArgs),
    /// Benchmark generated instances across densities.
    Sweep(SweepArgs),
    /// Grid-search solver parameters for the best mean success probability.
    Tune(TuneArgs),
    /// Aggregate benchmark records into median/IQR curves per problem size.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generate seeds `seed..seed+count`.
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum CertifyMethod {
    ActiveSet,
    Grid,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = CertifyMethod::ActiveSet)]
    method: CertifyMethod,
    /// Largest N accepted by the active-set enumeration.
    #[arg(long, default_value_t = ccvm_core::oracle::DEFAULT_N_LIMIT)]
    n_limit: usize,
    /// Grid spacing for `--method grid`.
    #[arg(long, default_value_t = 1e-3)]
    resolution: f64,
}

#[derive(Debug, Args, Clone)]
struct SolverArgs {
    /// TOML file with one table per solver.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parameter override `key=value`; repeatable, wins over the config file.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Master seed from which every trial seed derives.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Run trials on one thread (results are identical either way).
    #[arg(long)]
    serial: bool,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    solver: String,
    #[command(flatten)]
    solver_args: SolverArgs,
    /// Results file (JSON); defaults to `<instance stem>.<solver>.json` in the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
struct TimingArgs {
    /// Gap levels in percent.
    #[arg(long, default_value = "0.1,1,5")]
    gaps: String,
    /// Pulse spacing for the physical time estimate, seconds.
    #[arg(long, default_value_t = ccvm_core::bench::DEFAULT_T_PULSE)]
    t_pulse: f64,
    /// Use this per-trial time (seconds) for machine TTS instead of measuring,
    /// which makes the output byte-reproducible.
    #[arg(long)]
    wall_time: Option<f64>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Directory of `.boxqp` instances.
    #[arg(long)]
    dir: PathBuf,
    /// Comma-separated solver names, or `all`.
    #[arg(long, default_value = "all")]
    solvers: String,
    #[command(flatten)]
    solver_args: SolverArgs,
    #[command(flatten)]
    timing: TimingArgs,
    /// Output directory for `records.jsonl` and `records.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value = "0.3,0.7,1.0")]
    densities: String,
    /// Instance seeds: a list `0,1,5` or a range `0..10`.
    #[arg(long, default_value = "0..10")]
    seeds: String,
    #[arg(long)]
    solver: String,
    #[command(flatten)]
    solver_args: SolverArgs,
    #[arg(long, default_value_t = 0.1)]
    gap: f64,
    #[arg(long, default_value_t = ccvm_core::bench::DEFAULT_T_PULSE)]
    t_pulse: f64,
    #[arg(long)]
    wall_time: Option<f64>,
    /// Tune per density over this grid axis `key=v1,v2,...` first; repeatable.
    #[arg(long = "grid", value_name = "KEY=V1,V2")]
    grid: Vec<String>,
    /// Trials per instance and grid point while tuning.
    #[arg(long, default_value_t = 100)]
    tune_trials: usize,
    /// CSV output path; defaults to `sweep.csv` in the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TuneArgs {
    /// Directory of certified `.boxqp` instances.
    #[arg(long)]
    dir: PathBuf,
    #[arg(long)]
    solver: String,
    #[command(flatten)]
    solver_args: SolverArgs,
    /// Grid axis `key=v1,v2,...`; repeatable.
    #[arg(long = "grid", value_name = "KEY=V1,V2", required = true)]
    grid: Vec<String>,
    #[arg(long, default_value_t = 0.1)]
    gap: f64,
    /// Write the winning parameters as a config file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// `records.jsonl` written by `bench`.
    #[arg(long)]
    records: PathBuf,
    #[arg(long, default_value = "physical")]
    metric: String,
    /// CSV output path; defaults to `aggregate.csv` in the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit status per error class.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) => 1,
        Error::Parse { .. }
        | Error::Validation(_)
        | Error::Io { .. }
        | Error::OptimumViolation { .. } => 2,
        Error::Capacity { .. } => 3,
        Error::Divergence { .. } => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Certify(a) => commands::certify(a),
        Command::Solve(a) => commands::solve(a),
        Command::Bench(a) => commands::bench(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Tune(a) => commands::tune(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
