use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cmchoice", version, about = "Panel multinomial choice estimation with fixed effects")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// `key = value` file of default flag values; explicit flags win.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a panel (or market-share) dataset and write it as CSV.
    Simulate(SimulateArgs),
    /// Estimate the index direction from a panel CSV.
    Estimate(EstimateArgs),
    /// Monte Carlo study of the estimator: bias, SD and rMSE.
    Montecarlo(MonteCarloArgs),
    /// Scan identified sets of a discrete-support design.
    Idset(IdsetArgs),
    /// Estimate from market-level shares.
    Aggregate(AggregateArgs),
    /// Run the property battery; exits 0 iff every check passes.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct FirstStageArgs {
    /// Candidate neighbor counts for cross-validation, e.g. 5,10,20.
    #[arg(long, value_delimiter = ',', value_name = "K,...")]
    pub k_grid: Option<Vec<usize>>,

    /// Fixed neighbor count (skips cross-validation).
    #[arg(long, conflicts_with = "k_grid")]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OptimizerArgs {
    /// Subgradient iterations per start.
    #[arg(long, default_value_t = 5000)]
    pub max_iter: usize,

    /// Random restarts per face.
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Individuals (or markets with --aggregate).
    #[arg(long, default_value_t = 1000)]
    pub n: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,

    /// Add a time-varying discrete control that shifts option 1's shocks.
    #[arg(long)]
    pub controls: bool,

    /// Simulate market shares instead of individual choices.
    #[arg(long)]
    pub aggregate: bool,

    /// Consumers per market for sampled shares (exact shares if absent).
    #[arg(long, requires = "aggregate")]
    pub consumers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,

    /// Result document path (stdout if absent).
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// Match on the z column: only time-constant controls, per-cell first stage.
    #[arg(long)]
    pub controls: bool,

    /// Optimizer seed for random restarts.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Also write the moment terms to this CSV.
    #[arg(long, value_name = "PATH")]
    pub terms: Option<PathBuf>,

    #[command(flatten)]
    pub first_stage: FirstStageArgs,

    #[command(flatten)]
    pub optimizer: OptimizerArgs,
}

#[derive(Debug, Args)]
pub struct MonteCarloArgs {
    /// Sample sizes, e.g. 250,500,1000.
    #[arg(long, value_delimiter = ',', default_value = "250,500,1000")]
    pub n: Vec<usize>,

    #[arg(long, default_value_t = 200)]
    pub reps: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// CSV table path; the aligned text table always goes to stdout.
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// Full-size study: 6000 replications at n = 250, 500, 1000, 2000.
    #[arg(long)]
    pub full: bool,

    #[command(flatten)]
    pub first_stage: FirstStageArgs,

    #[command(flatten)]
    pub optimizer: OptimizerArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Design {
    /// Every covariate on {1, 1/2, ..., 1/s}.
    SupportPoints,
    /// One binary coordinate, the others on a bounded grid.
    Bounded,
}

#[derive(Debug, Args)]
pub struct IdsetArgs {
    #[arg(long, value_enum, default_value_t = Design::SupportPoints)]
    pub design: Design,

    /// Support sizes to scan, e.g. 2,3,4.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    pub s_points: Vec<usize>,

    /// Sampled covariate pairs per support size.
    #[arg(long, default_value_t = 100_000)]
    pub pairs_budget: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    #[arg(long, allow_negative_numbers = true)]
    pub grid_min: Option<f64>,

    #[arg(long, allow_negative_numbers = true)]
    pub grid_max: Option<f64>,

    #[arg(long)]
    pub grid_steps: Option<usize>,

    /// Directory for the CSV grids and PBM bitmaps.
    #[arg(long, value_name = "DIR")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,

    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// Append the product of two covariates (1-based), e.g. 1,2.
    #[arg(long, value_delimiter = ',', num_args = 1, value_name = "J1,J2")]
    pub interaction: Option<Vec<usize>>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[command(flatten)]
    pub optimizer: OptimizerArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    HingeSign,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Smaller draw counts.
    #[arg(long)]
    pub quick: bool,

    #[arg(long, default_value_t = 2024)]
    pub seed: u64,

    #[arg(long, value_enum, hide = true)]
    pub inject_fault: Option<FaultArg>,
}
