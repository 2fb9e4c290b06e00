//! `ecbinfl`: simulation, pricing, calibration and model comparison for the
//! inflation / ECB rate / short rate model and the affine benchmark.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::GridOverride;

#[derive(Debug, Parser)]
#[command(name = "ecbinfl", version, about = "Inflation-linked pricing with ECB rate jumps")]
pub struct Cli {
    /// TOML configuration file; flags take precedence over its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for Monte Carlo streams and optimizer restarts.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// PIDE grid as `N,H,J,zmax`: steps per month, rate levels (checked
    /// against the band), z intervals and z upper bound.
    #[arg(long, global = true, value_name = "N,H,J,ZMAX")]
    pub grid: Option<GridOverride>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate joint paths of (inflation, ECB rate, short rate).
    Simulate(SimulateArgs),
    /// Price nominal and real bonds and ZCIIS rates.
    Price(PriceArgs),
    /// Calibrate one model date by date against ZCIIS quotes.
    Calibrate(CalibrateArgs),
    /// Calibrate both models on the same panels and tabulate the errors.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of paths (at least 1).
    #[arg(long)]
    pub paths: usize,
    /// Horizon in years (default 1, or `[simulate] horizon`).
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Euler step in years (default 1/1200, or `[simulate] dt`).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Initial state `pi=..,r=..,z=..`.
    #[arg(long)]
    pub state: Option<String>,
}

#[derive(Debug, Args)]
pub struct PriceArgs {
    /// `ours` or `hhy` (affine benchmark).
    #[arg(long, default_value = "ours")]
    pub model: String,
    /// Maturities in years; comma-separated or repeated.
    #[arg(long, required = true, value_delimiter = ',')]
    pub maturity: Vec<f64>,
    /// State `pi=..,r=..,z=..` (ours) or `x1=..,x2=..,x3=..` (hhy).
    #[arg(long)]
    pub state: Option<String>,
    /// Also price by Monte Carlo (our model only).
    #[arg(long)]
    pub mc_check: bool,
    #[arg(long, default_value_t = 20_000)]
    pub mc_paths: usize,
    #[arg(long, default_value_t = 1.0 / 1200.0)]
    pub mc_dt: f64,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Quotes CSV `date,maturity_years,rate_percent`.
    #[arg(long)]
    pub quotes: Option<PathBuf>,
    /// HICP CSV `date,index`.
    #[arg(long)]
    pub hicp: Option<PathBuf>,
    /// Optional ECB rate CSV `date,rate_percent`.
    #[arg(long)]
    pub ecb_rates: Option<PathBuf>,
    /// Start each date from the previous date's fit.
    #[arg(long)]
    pub warm_start: bool,
    /// Cap on objective evaluations per date.
    #[arg(long)]
    pub max_evals: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// `ours` or `hhy` (affine benchmark).
    #[arg(long, default_value = "ours")]
    pub model: String,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Period named in the table caption (default: first to last date).
    #[arg(long)]
    pub period: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
