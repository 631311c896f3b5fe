mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;


#[derive(Parser, Debug)]
#[command(name = "ontrack", version, about = "Retirement projections and savings-experiment analysis")]
pub struct Cli {
    /// Print machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    pub json: bool,

    /// Log level for stderr diagnostics (e.g. `info`, `debug`).
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Project retirement income for one employee.
    Project(ProfileArgs),
    /// Contribution rate needed to reach a replacement goal.
    RequiredRate(RequiredRateArgs),
    /// Grid of required contribution rates by start and retirement age.
    Table(TableArgs),
    /// Compare a projection with a changed contribution rate or lump sum.
    Whatif(WhatIfArgs),
    /// Assign treatment arms by stratified block randomization.
    Randomize(RandomizeArgs),
    /// Generate a synthetic roster, or draw outcomes for a randomized one.
    Simulate(SimulateArgs),
    /// Treatment-effect estimators on an analyzed roster.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Honest causal forest for heterogeneous effects.
    #[command(subcommand)]
    Forest(ForestCommand),
    /// Employer minimum-contribution game.
    #[command(subcommand)]
    Game(GameCommand),
    /// Run the HTTP API.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GenderArg {
    Male,
    Female,
}

#[derive(Args, Debug)]
pub struct ProfileArgs {
    /// JSON file with a full profile; the flags below override its fields.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub gender: Option<GenderArg>,
    #[arg(long)]
    pub age: Option<u32>,
    #[arg(long)]
    pub retirement_age: Option<u32>,
    /// Current retirement balance, in currency units.
    #[arg(long)]
    pub balance: Option<f64>,
    /// Annual gross salary, in currency units.
    #[arg(long)]
    pub salary: Option<f64>,
    /// Contribution rate as a fraction, e.g. 0.075.
    #[arg(long)]
    pub rate: Option<f64>,
    /// JSON or TOML file of economic assumptions.
    #[arg(long)]
    pub assumptions: Option<PathBuf>,
    /// Use one drawdown rate for everyone instead of the schedule.
    #[arg(long)]
    pub drawdown: Option<f64>,
    #[arg(long)]
    pub monthly: bool,
}

#[derive(Args, Debug)]
pub struct RequiredRateArgs {
    /// Target replacement rate.
    #[arg(long, default_value_t = 0.75)]
    pub p: f64,
    /// Drawdown rate in retirement.
    #[arg(long, default_value_t = 0.04)]
    pub d: f64,
    /// Real return.
    #[arg(long, default_value_t = 0.05)]
    pub r: f64,
    /// Years of saving.
    #[arg(long)]
    pub n: u32,
    #[arg(long, requires = "salary")]
    pub balance: Option<f64>,
    #[arg(long)]
    pub salary: Option<f64>,
}

#[derive(Args, Debug)]
pub struct TableArgs {
    #[arg(long, default_value_t = 0.75)]
    pub p: f64,
    #[arg(long, default_value_t = 0.04)]
    pub d: f64,
    #[arg(long, default_value_t = 0.05)]
    pub r: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [25, 30, 35, 40])]
    pub start_ages: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_values_t = [55, 60, 65, 70, 75])]
    pub retirement_ages: Vec<u32>,
}

#[derive(Args, Debug)]
pub struct WhatIfArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Change in contribution rate, e.g. 0.075 to go from 7.5% to 15%.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub delta_c: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lump_sum: f64,
}

#[derive(Args, Debug)]
pub struct RosterArgs {
    /// Roster CSV.
    pub roster: PathBuf,
    /// Malformed rows to skip (and report) before giving up.
    #[arg(long, default_value_t = 0)]
    pub max_row_errors: usize,
}

#[derive(Args, Debug)]
pub struct CutpointArgs {
    /// Inclusive upper bounds of the first three age buckets.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [27, 32, 38])]
    pub cutpoints: Vec<u32>,
}

#[derive(Args, Debug)]
pub struct RandomizeArgs {
    #[command(flatten)]
    pub input: RosterArgs,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub cutpoints: CutpointArgs,
    /// Write the randomized roster here instead of stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Randomized roster to draw outcomes for. Without it a fresh covariate
    /// roster is generated.
    #[arg(long)]
    pub roster: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub max_row_errors: usize,
    #[arg(long)]
    pub seed: u64,
    /// JSON or TOML file of data-generating parameters.
    #[arg(long)]
    pub dgp: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub effect_email: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub effect_email_phone: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub male_extra_effect: Option<f64>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum OutcomeArg {
    Change,
    PostRate,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CovarianceArg {
    Hc0,
    Hc1,
}

#[derive(Args, Debug)]
pub struct EstimatorArgs {
    #[command(flatten)]
    pub input: RosterArgs,
    #[arg(long, value_enum, default_value = "change")]
    pub outcome: OutcomeArg,
    #[arg(long, value_enum, default_value = "hc1")]
    pub covariance: CovarianceArg,
    /// Drop the stratum fixed effects.
    #[arg(long)]
    pub no_fixed_effects: bool,
    /// One indicator for both treatment arms.
    #[arg(long)]
    pub pooled: bool,
    #[command(flatten)]
    pub cutpoints: CutpointArgs,
}

#[derive(Subcommand, Debug)]
pub enum AnalyzeCommand {
    /// Intention to treat: OLS on arm indicators.
    Itt(EstimatorArgs),
    /// Effect of clicking, instrumented by assignment.
    Late(EstimatorArgs),
    /// Arm effects interacted with a group indicator.
    Het {
        #[command(flatten)]
        est: EstimatorArgs,
        /// male, female, disadvantaged, white, min_saver or age>=N.
        #[arg(long)]
        group: String,
        /// Keep the stratum fixed effects (off by default here).
        #[arg(long)]
        fixed_effects: bool,
    },
    /// Percentile bootstrap of each treated arm's mean difference from control.
    Bootstrap {
        #[command(flatten)]
        input: RosterArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = ontrack_core::experiment::DEFAULT_RESAMPLES)]
        resamples: usize,
        #[arg(long, value_enum, default_value = "change")]
        outcome: OutcomeArg,
        /// Include every resampled difference in the JSON output.
        #[arg(long)]
        draws: bool,
    },
}

#[derive(Args, Debug)]
pub struct ForestParamArgs {
    #[arg(long, default_value_t = 2000)]
    pub trees: usize,
    #[arg(long, default_value_t = 0.25)]
    pub split_fraction: f64,
    #[arg(long, default_value_t = 0.25)]
    pub estimate_fraction: f64,
    #[arg(long, default_value_t = 5)]
    pub min_leaf_treated: usize,
    #[arg(long, default_value_t = 5)]
    pub min_leaf_control: usize,
    #[arg(long, default_value_t = 1.0)]
    pub within_leaf_penalty: f64,
    #[arg(long, default_value_t = 0.5)]
    pub feature_subsample: f64,
}

#[derive(Subcommand, Debug)]
pub enum ForestCommand {
    /// Grow a forest on a roster with outcomes and save it as JSON.
    Train {
        #[command(flatten)]
        input: RosterArgs,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        params: ForestParamArgs,
        #[arg(long, value_enum, default_value = "change")]
        outcome: OutcomeArg,
        #[command(flatten)]
        cutpoints: CutpointArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Per-employee CATE predictions as `id,cate` CSV.
    Predict {
        #[arg(long)]
        forest: PathBuf,
        #[command(flatten)]
        input: RosterArgs,
        #[command(flatten)]
        cutpoints: CutpointArgs,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Distribution of predicted CATEs over a roster.
    Summary {
        #[arg(long)]
        forest: PathBuf,
        #[command(flatten)]
        input: RosterArgs,
        #[command(flatten)]
        cutpoints: CutpointArgs,
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum GameCommand {
    /// Subgame-perfect equilibrium for one parameter pair.
    Spe {
        /// Reputation damage, as a decimal or fraction (`1/3`).
        #[arg(long)]
        delta: String,
        /// Probability of the yolo type.
        #[arg(long)]
        y: String,
    },
    /// CSV grid of regimes over a (delta, y) rectangle.
    Sweep {
        #[arg(long, default_value = "0")]
        delta_min: String,
        #[arg(long, default_value = "4")]
        delta_max: String,
        #[arg(long, default_value = "0")]
        y_min: String,
        #[arg(long, default_value = "1")]
        y_max: String,
        /// Intervals per axis.
        #[arg(long, default_value_t = 40)]
        steps: u32,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// TOML config; `ONTRACK_*` environment variables override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = EnvFilter::try_new(&cli.log).unwrap_or_else(|_| EnvFilter::new("warn"));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            e.report();
            e.exit_code()
        }
    }
}
