mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "tomocov", version, about = "Covariance estimation and heterogeneity analysis from tomographic projections")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Single worker thread. Reductions are ordered regardless, so outputs
    /// match multi-threaded runs bit for bit.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Kernel-block cache directory; falls back to $TOMOCOV_CACHE_DIR and
    /// then the config file.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset and its ground-truth sidecar.
    Simulate(SimulateArgs),
    /// Build and cache the kernel blocks for a given K.
    Precompute(PrecomputeArgs),
    /// Solve for the mean and covariance and write an estimate file.
    Estimate(EstimateArgs),
    /// Rank, coordinates, mixture fit and class volumes.
    Analyze(AnalyzeArgs),
    /// Metrics against ground truth as CSV tables.
    Report(ReportArgs),
    /// Tables for external plotting.
    PlotData(PlotDataArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// two-class, three-class or triangle.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Target heterogeneity SNR; omit for noiseless data.
    #[arg(long)]
    snr_het: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PrecomputeArgs {
    #[arg(long)]
    k_max: Option<usize>,
    /// Take K from this dataset.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SolverFlags {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Covariance solver (limiting or empirical).
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    mean_solver: Option<String>,
    #[arg(long)]
    cg_tol: Option<f64>,
    #[arg(long)]
    rank_gap_delta: Option<f64>,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    estimate: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override C = rank + 1.
    #[arg(long)]
    classes: Option<usize>,
    /// Mixture fitter (isotropic or full).
    #[arg(long)]
    mixture: Option<String>,
    /// Ground truth, used only to label the coordinate table.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    estimate: PathBuf,
    /// Directory written by `analyze`.
    #[arg(long)]
    analysis: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PlotDataArgs {
    #[arg(long)]
    estimate: PathBuf,
    #[arg(long)]
    analysis: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let threads = if cli.deterministic { Some(1) } else { cli.threads };
    if let Some(t) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(commands::EXIT_USAGE);
        }
    }
    let cache = cli.cache_dir.as_ref();
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Precompute(a) => commands::precompute(a, cache),
        Command::Estimate(a) => commands::estimate(a, cache),
        Command::Analyze(a) => commands::analyze(a, cache),
        Command::Report(a) => commands::report(a),
        Command::PlotData(a) => commands::plot_data(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
