use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "scte", version, about = "Sample-constrained treatment-effect designs")]
pub struct Cli {
    /// Flat `key = value` file; keys are long flag names. Flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic instance (covariates and both outcome arms) to CSV.
    Gen(GenArgs),
    /// Print the leverage score of every row.
    Leverage(LeverageArgs),
    /// Run one leverage-sampling ITE design and report its RMSE.
    DesignIte(DesignIteArgs),
    /// Run one recursive balancing ATE design and report its deviation.
    DesignAte(DesignAteArgs),
    /// Monte Carlo sweep over sample fractions for every method.
    #[command(subcommand)]
    Experiment(ExperimentTask),
    /// Aggregate a records file into mean and 30/70 percentile bands.
    Summarize(SummarizeArgs),
}

#[derive(Debug, Subcommand)]
pub enum ExperimentTask {
    /// Individual treatment effects (metric: rmse).
    Ite(ExperimentArgs),
    /// Average treatment effect (metric: deviation).
    Ate(ExperimentArgs),
}

/// Where the data come from: CSV files or a synthetic recipe.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// Covariate CSV, one row per unit [default: none]
    #[arg(long, value_name = "FILE")]
    pub x: Option<PathBuf>,

    /// Outcome CSV with header `y1,y0` (or `y0` alone with --shift) [default: none]
    #[arg(long, value_name = "FILE")]
    pub y: Option<PathBuf>,

    /// The covariate CSV starts with a header line
    #[arg(long)]
    pub header: bool,

    /// Constant treatment effect: y1 := y0 + SHIFT [default: none]
    #[arg(long, value_name = "TAU", allow_negative_numbers = true)]
    pub shift: Option<f64>,

    /// Synthetic instance instead of files, e.g. `--synthetic n=2000 d=25` [default: none]
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
    pub synthetic: Vec<String>,

    /// Noise standard deviation of synthetic outcomes [default: 1/sqrt(d)]
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Instance shape, e.g. `n=100 d=5` [default: none, required]
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
    pub synthetic: Vec<String>,

    /// Noise standard deviation [default: 1/sqrt(d)]
    #[arg(long)]
    pub sigma: Option<f64>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Covariate output path [default: none, required]
    #[arg(long, value_name = "FILE")]
    pub out_x: Option<PathBuf>,

    /// Outcome output path [default: none, required]
    #[arg(long, value_name = "FILE")]
    pub out_y: Option<PathBuf>,

    /// Write a header line to the covariate file
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
pub struct LeverageArgs {
    /// Covariate CSV [default: none, required]
    #[arg(long, value_name = "FILE")]
    pub x: Option<PathBuf>,

    #[arg(long)]
    pub header: bool,

    /// Smoothing threshold; scores are of the matrix keeping sigma_i >= sqrt(gamma)
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,

    /// Output file, one score per line [default: stdout]
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Budget,
    Theory,
}

#[derive(Debug, Args)]
pub struct DesignIteArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Expected sample size as a fraction of n
    #[arg(long, default_value_t = 0.2)]
    pub fraction: f64,

    #[arg(long, value_enum, default_value_t = Mode::Budget)]
    pub mode: Mode,

    #[arg(long, default_value_t = 1.0)]
    pub c0: f64,

    /// Run the uniform baseline with pi_j = s/n instead of leverage sampling
    #[arg(long)]
    pub literal_uniform: bool,

    /// Write the estimated ITE vector (`ite_hat` column) [default: none]
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DesignAteArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Budget s = ceil(fraction * n)
    #[arg(long, default_value_t = 0.3)]
    pub fraction: f64,

    /// Balance/robustness trade-off of the walk, in (0, 1]
    #[arg(long, default_value_t = 0.5)]
    pub phi: f64,

    /// Write the final assignment (`unit,z` columns) [default: none]
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Master seed; also seeds the synthetic instance
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value_t = 1000)]
    pub trials: usize,

    /// Comma-separated sample fractions in (0, 1]
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1"
    )]
    pub fractions: Vec<f64>,

    /// Comma-separated method labels [default: every method of the task]
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<String>,

    #[arg(long, default_value_t = 0.5)]
    pub phi: f64,

    #[arg(long, default_value_t = 1.0)]
    pub c0: f64,

    #[arg(long, value_enum, default_value_t = Mode::Budget)]
    pub mode: Mode,

    /// Uniform ITE baseline with pi_j = s/n instead of a budget-matched plan
    #[arg(long)]
    pub literal_uniform: bool,

    /// Worker threads; 0 uses every core
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,

    /// Records CSV [default: none, required]
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// Also write the summary CSV here [default: none]
    #[arg(long, value_name = "FILE")]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// Records CSV produced by `experiment` [default: none, required]
    #[arg(long, value_name = "FILE")]
    pub records: Option<PathBuf>,

    /// Summary CSV [default: stdout]
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}
