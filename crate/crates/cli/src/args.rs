use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cavconc", version, about = "Cavity-decay entanglement concentration simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form and quadrature results for one configuration.
    Run(RunArgs),
    /// One CSV row per grid point of a single varied parameter.
    Sweep(SweepArgs),
    /// Monte Carlo estimate of the detection statistics.
    Trajectories(TrajectoryArgs),
    /// Cross-check closed form, quadrature and Monte Carlo.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Vary {
    K,
    T2,
    A,
}

/// Physical configuration shared by every command. Amplitudes are `re` or
/// `re,im`; `c` and `d` default to `a` and `b`.
#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    #[arg(long, default_value = "0.6", allow_hyphen_values = true)]
    pub a: String,
    #[arg(long, default_value = "0.8", allow_hyphen_values = true)]
    pub b: String,
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub d: Option<String>,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    pub k: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub t2: f64,
    #[arg(long, default_value_t = 2)]
    pub nmax: usize,
    /// Gauss–Legendre nodes for the detection-window quadrature.
    #[arg(long, default_value_t = 64)]
    pub quad_points: usize,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, value_enum)]
    pub vary: Vary,
    #[arg(long, allow_hyphen_values = true)]
    pub from: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub to: f64,
    #[arg(long)]
    pub steps: usize,
}

#[derive(Debug, Clone, Args)]
pub struct MonteCarloArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads; defaults to $CAVCONC_WORKERS, then the number of CPUs.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub mc: MonteCarloArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,
}
