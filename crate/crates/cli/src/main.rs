//! Command-line driver: simulate datasets, scan them for marker-trait
//! associations, run repeated model-comparison experiments, and recompute
//! evaluation tables from existing outputs.
//!
//! Every command writes its fully resolved configuration (defaults
//! included) to config.echo in the output directory; re-running with
//! `--config <dir>/config.echo` reproduces the outputs byte-identically,
//! except timing.csv which records wall-clock measurements.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

/// Failures split by exit code: usage/config problems (bad flags, missing
/// or invalid input files) exit 2; failures while running exit 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

pub fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Parser)]
#[command(
    name = "spatial-lmm",
    version,
    about = "Bayesian association scanning between genetic markers and correlated quantitative traits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory
    Simulate(SimulateArgs),
    /// Scan a dataset for marker-trait associations
    Scan(ScanArgs),
    /// Repeated simulate-scan-score comparison of the two models
    Replicate(ReplicateArgs),
    /// Recompute ROC/AUC tables from an existing results file and truth table
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    /// Gaussian shared effect and residuals
    Normal,
    /// Multivariate Student-t with --df degrees of freedom
    StudentT,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// TOML configuration file; command-line flags override its values
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Simulation preset 1-6
    #[arg(long)]
    pub case: Option<usize>,
    /// Number of individuals
    #[arg(long)]
    pub n: Option<usize>,
    /// Base RNG seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Noise family for the shared effect and residuals
    #[arg(long, value_enum)]
    pub noise: Option<NoiseArg>,
    /// Degrees of freedom; required with --noise student-t
    #[arg(long)]
    pub df: Option<f64>,
}

#[derive(Args)]
pub struct ScanArgs {
    /// TOML configuration file; command-line flags override its values
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Dataset directory holding genotypes.csv and phenotypes.csv
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Models to fit, comma separated (lm,lmm)
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    /// Total Gibbs iterations per chain
    #[arg(long)]
    pub iters: Option<usize>,
    /// Iterations discarded from the start of each chain
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Base seed; per-marker chains derive their own seeds from it
    #[arg(long)]
    pub seed: Option<u64>,
    /// Significance level for credible intervals and Bonferroni
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Worker threads for the scan
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args)]
pub struct ReplicateArgs {
    /// TOML configuration file; command-line flags override its values
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Simulation preset 1-6
    #[arg(long)]
    pub case: Option<usize>,
    /// Number of simulated datasets (at least 2)
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Number of individuals per dataset
    #[arg(long)]
    pub n: Option<usize>,
    /// Base RNG seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Total Gibbs iterations per chain
    #[arg(long)]
    pub iters: Option<usize>,
    /// Iterations discarded from the start of each chain
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Significance level for credible intervals and Bonferroni
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Worker threads; repeats run concurrently
    #[arg(long)]
    pub workers: Option<usize>,
    /// Noise family override for the chosen case
    #[arg(long, value_enum)]
    pub noise: Option<NoiseArg>,
    /// Degrees of freedom; required with --noise student-t
    #[arg(long)]
    pub df: Option<f64>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// TOML configuration file; command-line flags override its values
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// results.csv produced by scan
    #[arg(long, value_name = "PATH")]
    pub results: Option<PathBuf>,
    /// truth.csv of the dataset the results were scanned from
    #[arg(long, value_name = "PATH")]
    pub truth: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(&args),
        Command::Scan(args) => commands::scan(&args),
        Command::Replicate(args) => commands::replicate(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
