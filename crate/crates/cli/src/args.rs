use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::manifest::SweepVar;

#[derive(Debug, Parser)]
#[command(name = "pdp", version, about = "Design 1D potentials whose bound state resists periodic forcing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rate, spectrum and constraint margins of one potential.
    Evaluate(EvaluateArgs),
    /// Minimise the rate from the configured initial well.
    Optimize(OptimizeArgs),
    /// Independent optimisations over a list of `a` or `mu` values.
    Sweep(SweepArgs),
    /// Forced time evolution starting from the bound state.
    Simulate(SimulateArgs),
    /// Forced time evolution starting from the bound state plus noise.
    Filter(FilterArgs),
    /// Analytic gradients against central differences.
    Gradcheck(GradcheckArgs),
    /// Repeat the run recorded in a manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// `x,V` file on the design grid; defaults to the configured initial well.
    #[arg(long)]
    pub potential: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Optimise over symmetric potentials.
    #[arg(long, conflicts_with = "asymmetric")]
    pub symmetric: bool,
    /// Optimise over all nodal values.
    #[arg(long)]
    pub asymmetric: bool,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long, value_enum)]
    pub vary: SweepVar,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long)]
    pub potential: Option<PathBuf>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub sim: SimulateArgs,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long)]
    pub potential: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub directions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Finite-difference step (directions have unit maximum).
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}
