//! `riskratio` command-line interface.

mod commands;
mod error;
mod ingest;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use riskratio::bootstrap::DegeneratePolicy;
use riskratio::{Method, Side, Tail};

use crate::ingest::AnomalyMode;

#[derive(Debug, Parser)]
#[command(
    name = "riskratio",
    version,
    about = "Risk ratios and confidence intervals for event attribution"
)]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Directory of prebuilt Wang-Shan tables.
    #[arg(long, global = true, env = "RISKRATIO_TABLE_DIR")]
    table_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Risk ratio and confidence interval for one event definition.
    RrCi(RrCiArgs),
    /// Intervals for a list of cutoffs.
    Sweep(SweepArgs),
    /// Point-process extreme-value fits and the EVA interval.
    FitEva(FitEvaArgs),
    /// Time-averaged risk ratio over several simulated years.
    TimeAverage(TimeAverageArgs),
    /// Coverage simulation over a grid of (n, RR, pF).
    Simulate(SimulateArgs),
    /// Build a Wang-Shan lower-bound table.
    BuildWsTable(BuildWsArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV with columns scenario, year (optional), member, value.
    pub input: Option<PathBuf>,

    /// Reference file whose `value` mean defines anomalies.
    #[arg(long)]
    pub anomaly: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = AnomalyMode::Subtract, requires = "anomaly")]
    pub anomaly_mode: AnomalyMode,

    /// Which tail defines the event.
    #[arg(long, default_value = "upper", value_parser = parse_tail)]
    pub tail: Tail,
}

#[derive(Debug, Args)]
pub struct IntervalArgs {
    /// Confidence level.
    #[arg(long, default_value_t = 0.9)]
    pub level: f64,

    /// two-sided, lower or upper.
    #[arg(long, default_value = "two-sided", value_parser = parse_side)]
    pub side: Side,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Bootstrap replicates.
    #[arg(long, default_value_t = 10_000)]
    pub nb: usize,

    /// Probability estimator inside the bootstrap.
    #[arg(long, value_enum, default_value_t = Estimator::Nonparametric)]
    pub estimator: Estimator,

    /// What to do with bootstrap replicates that have a zero proportion.
    #[arg(long, value_enum, default_value_t = Policy::Drop)]
    pub degenerate: Policy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Estimator {
    Nonparametric,
    ParametricNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Policy {
    Drop,
    Error,
}

impl From<Policy> for DegeneratePolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Drop => DegeneratePolicy::DropAndFlag,
            Policy::Error => DegeneratePolicy::Error,
        }
    }
}

#[derive(Debug, Args)]
pub struct RrCiArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Counts `yF,nF,yC,nC` instead of an input file.
    #[arg(long, conflicts_with = "input", value_parser = parse_counts)]
    pub counts: Option<[u64; 4]>,

    /// Event cutoff (required with an input file).
    #[arg(long, allow_hyphen_values = true)]
    pub cutoff: Option<f64>,

    #[arg(long, default_value = "koopman", value_parser = parse_method)]
    pub method: Method,

    #[command(flatten)]
    pub interval: IntervalArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Comma-separated cutoffs.
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        allow_hyphen_values = true
    )]
    pub cutoffs: Vec<f64>,

    #[arg(long, default_value = "koopman", value_parser = parse_method)]
    pub method: Method,

    #[command(flatten)]
    pub interval: IntervalArgs,
}

#[derive(Debug, Args)]
pub struct FitEvaArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, allow_hyphen_values = true)]
    pub cutoff: f64,

    /// Threshold as a quantile of the pooled values of both scenarios.
    #[arg(long, default_value_t = 0.9)]
    pub threshold_quantile: f64,

    /// Threshold in data units; overrides --threshold-quantile.
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<f64>,

    /// Blocks per scenario (default: one block per value).
    #[arg(long)]
    pub n_blocks: Option<f64>,

    /// eva-lrt or eva-delta.
    #[arg(long, default_value = "eva-lrt", value_parser = parse_method)]
    pub method: Method,

    #[arg(long, default_value_t = 0.9)]
    pub level: f64,

    #[arg(long, default_value = "two-sided", value_parser = parse_side)]
    pub side: Side,
}

#[derive(Debug, Args)]
pub struct TimeAverageArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, allow_hyphen_values = true)]
    pub cutoff: f64,

    /// Bootstrap construction for the pooled ratio (year-block resampling).
    #[arg(long, value_parser = parse_method)]
    pub boot_method: Option<Method>,

    /// Interval method for the per-year ratios.
    #[arg(long, default_value = "koopman", value_parser = parse_method)]
    pub per_year_method: Method,

    #[command(flatten)]
    pub interval: IntervalArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Ensemble sizes.
    #[arg(long = "n", value_delimiter = ',', default_values_t = [25u64, 50, 100, 400])]
    pub n: Vec<u64>,

    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 4.0, 8.0, 16.0])]
    pub rr: Vec<f64>,

    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.025, 0.05, 0.10, 0.20])]
    pub pf: Vec<f64>,

    /// Methods to evaluate (default: all count-based methods).
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub methods: Vec<Method>,

    /// Datasets per cell.
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,

    /// Use 5000 datasets per cell.
    #[arg(long, conflicts_with = "reps")]
    pub full: bool,

    /// One-sided level of each bound.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Bootstrap replicates per dataset.
    #[arg(long, default_value_t = 1000)]
    pub nb: usize,

    /// Metrics CSV destination (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildWsArgs {
    #[arg(long)]
    pub nf: u64,

    /// Counterfactual size (default: same as --nf).
    #[arg(long)]
    pub nc: Option<u64>,

    /// One-sided level of the lower bounds.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,

    /// Nuisance grid points.
    #[arg(long, default_value_t = 10_000)]
    pub grid_size: usize,

    /// Output file or directory (default: the table directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: riskratio::Error| e.to_string())
}

fn parse_side(s: &str) -> Result<Side, String> {
    s.replace('-', "_")
        .parse()
        .map_err(|e: riskratio::Error| e.to_string())
}

fn parse_tail(s: &str) -> Result<Tail, String> {
    s.parse().map_err(|e: riskratio::Error| e.to_string())
}

fn parse_counts(s: &str) -> Result<[u64; 4], String> {
    let v: Vec<u64> = s
        .split(',')
        .map(|p| p.trim().parse::<u64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into()
        .map_err(|_| "expected four counts: yF,nF,yC,nC".to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = commands::Context {
        format: cli.format,
        table_dir: cli.table_dir,
    };
    let result = match &cli.command {
        Command::RrCi(a) => commands::rr_ci(&ctx, a),
        Command::Sweep(a) => commands::sweep(&ctx, a),
        Command::FitEva(a) => commands::fit_eva(&ctx, a),
        Command::TimeAverage(a) => commands::time_average(&ctx, a),
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::BuildWsTable(a) => commands::build_ws_table(&ctx, a),
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
