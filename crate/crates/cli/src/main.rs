//! `mixvix`: quantiser generation, pricing, benchmarking, calibration,
//! variance stripping and stability tests.
//!
//! Exit status is 0 on success, 1 on a domain or input error and 2 on a
//! usage error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use mixvix::calibration::ModelKind;
use mixvix::stability::Alignment;

use config::{ConventionOverrides, FileConfig, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] mixvix::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mixvix",
    version,
    about = "VIX futures and options under mixed Bergomi models"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML file with defaults for any of these settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for 2-D grid generation and calibration restarts [default: 42].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads [default: available parallelism].
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Grid cache directory [default: $MIXVIX_CACHE_DIR or ~/.cache/mixvix].
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// VIX window length in calendar days.
    #[arg(long, global = true)]
    window_days: Option<f64>,
    /// Days per year.
    #[arg(long, global = true)]
    day_count: Option<f64>,
    /// Lower end of the call moneyness window.
    #[arg(long, global = true)]
    moneyness_lo: Option<f64>,
    /// Upper end of the call moneyness window.
    #[arg(long, global = true)]
    moneyness_hi: Option<f64>,
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate an optimal Gaussian quantisation grid.
    Quantiser(QuantiserArgs),
    /// Price futures and options from model parameters and a variance curve.
    Price(PriceArgs),
    /// Time quantisation against quadrature on the reference workload.
    Bench(BenchArgs),
    /// Calibrate every expiry of one trade date.
    Calibrate(CalibrateArgs),
    /// Strip the initial forward variance curve from VIX options.
    Strip(StripArgs),
    /// Run a parameter stability test from an anchor date.
    Stability(StabilityArgs),
}

#[derive(Debug, Args)]
pub struct QuantiserArgs {
    /// Dimension of the standard normal law.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub dim: u8,
    /// Number of grid points.
    #[arg(long)]
    pub n: usize,
    /// Convergence tolerance [default: 1e-12 in 1-D, 1e-4 in 2-D].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output path [default: the cache entry].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PriceArgs {
    /// JSON model parameters, e.g. {"model": "1f", "k": 1, "gamma": 0.61, ...}.
    #[arg(long)]
    pub params: PathBuf,
    /// CSV curve with `start,end,xi0` buckets or `maturity,xi0` anchors.
    #[arg(long)]
    pub curve: PathBuf,
    /// Maturities in years.
    #[arg(long, value_delimiter = ',', required = true)]
    pub maturities: Vec<f64>,
    /// Option strikes in index points.
    #[arg(long, value_delimiter = ',')]
    pub strikes: Vec<f64>,
    /// Continuously compounded rate.
    #[arg(long, default_value_t = 0.0)]
    pub rate: f64,
    /// Grid file to use instead of the cached default.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Output CSV [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: Option<ModelKind>,
    /// Timed repetitions per item.
    #[arg(long, default_value_t = 20)]
    pub repetitions: usize,
    /// Output CSV [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Quote CSV file or directory of CSV files.
    #[arg(long)]
    pub quotes: Option<PathBuf>,
    /// Trade date (YYYY-MM-DD).
    #[arg(long)]
    pub date: NaiveDate,
    #[arg(long)]
    pub model: Option<ModelKind>,
    /// Take xi0 from the variance strip instead of fitting it.
    #[arg(long)]
    pub fix_xi0_from_market: bool,
    /// Parameter CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Diagnostics JSON [default: the output path with a .json extension].
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StripArgs {
    /// Quote CSV file or directory of CSV files.
    #[arg(long)]
    pub quotes: Option<PathBuf>,
    /// Trade date (YYYY-MM-DD).
    #[arg(long)]
    pub date: NaiveDate,
    /// Stripped curve CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Slice JSON [default: the output path with a .json extension].
    #[arg(long)]
    pub slices: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AlignmentArg {
    /// Parameters travel with the expiry date.
    ExpiryDate,
    /// Parameters stay with the days to expiry.
    DaysToExpiry,
}

impl From<AlignmentArg> for Alignment {
    fn from(a: AlignmentArg) -> Self {
        match a {
            AlignmentArg::ExpiryDate => Alignment::ExpiryDate,
            AlignmentArg::DaysToExpiry => Alignment::DaysToExpiry,
        }
    }
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    /// Test number.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub test: u8,
    /// Directory (or file) of quote CSVs covering the whole horizon.
    #[arg(long)]
    pub quotes: Option<PathBuf>,
    /// Anchor trade date (YYYY-MM-DD).
    #[arg(long)]
    pub start: NaiveDate,
    #[arg(long)]
    pub model: Option<ModelKind>,
    /// Trading days after the anchor.
    #[arg(long, default_value_t = 30)]
    pub horizon: usize,
    #[arg(long, value_enum, default_value = "expiry-date")]
    pub alignment: AlignmentArg,
    /// Long-format error CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Summary statistics CSV [default: <out stem>.summary.csv].
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

fn setup(global: &GlobalArgs) -> Result<RunConfig, CliError> {
    let file = match &global.config {
        Some(path) => {
            config::require_exists(path)?;
            FileConfig::load(path)?
        }
        None => FileConfig::default(),
    };
    let flags = ConventionOverrides {
        window_days: global.window_days,
        day_count: global.day_count,
        moneyness_lo: global.moneyness_lo,
        moneyness_hi: global.moneyness_hi,
        ..ConventionOverrides::default()
    };
    let run = RunConfig::resolve(
        file,
        global.seed,
        global.threads,
        global.cache_dir.clone(),
        flags,
    );
    let c = &run.conventions;
    if !(c.window_days > 0.0
        && c.day_count > 0.0
        && c.time_nodes > 0
        && c.moneyness_lo < c.moneyness_hi)
    {
        return Err(CliError::Usage(format!("invalid conventions: {c:?}")));
    }
    mixvix::conventions::install(run.conventions);
    if let Some(n) = run.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(e.to_string()))?;
    }
    Ok(run)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = setup(&cli.global)?;
    match cli.command {
        Command::Quantiser(a) => commands::quantiser(&config, a),
        Command::Price(a) => commands::price(&config, a),
        Command::Bench(a) => commands::bench(&config, a),
        Command::Calibrate(a) => commands::calibrate(&config, a),
        Command::Strip(a) => commands::strip(&config, a),
        Command::Stability(a) => commands::stability(&config, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
