//! Command-line front end. [`run`] parses arguments, dispatches to one
//! command and maps the outcome onto a process exit code.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data_model::ContractTerm;
use crate::error::Error;
use crate::pricing::{Grid, Sweep};

pub use manifest::RunManifest;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_EMPTY_COHORT: u8 = 4;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "royalty",
    version,
    about = "Price, calibrate and backtest music royalty assets"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model to the traded multipliers in a deals file.
    Calibrate(CalibrateArgs),
    /// Price one asset and print the valuation as JSON.
    Price(PriceArgs),
    /// Buy-and-hold backtest at model prices, summarized per contract term.
    Backtest(BacktestArgs),
    /// Model multiplier across a ratio or age sweep, as CSV.
    Curves(CurvesArgs),
    /// Write synthetic deals (and optionally revenues) from known parameters.
    Synth(SynthArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

/// Deals file columns: asset_id,trade_date,price,ltm,lty,age_years,term
/// (dates YYYY-MM-DD, term 10Y|30Y|LOR; ltm and lty may be blank when
/// --revenues is given).
#[derive(Debug, Args)]
struct CalibrateArgs {
    /// Model number: 1 flat, 2 risk-adjusted, 3 age premium.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    model: u8,
    /// Deals CSV to fit.
    #[arg(long)]
    deals: PathBuf,
    /// Revenues CSV (asset_id,quarter,amount) used to fill or check LTM/LTY.
    #[arg(long)]
    revenues: Option<PathBuf>,
    /// JSON bounds, e.g. {"r":[0.005,0.6],"a":[0.05,2],"k":[0,1],"b":[0,0.1]}.
    #[arg(long)]
    bounds: Option<PathBuf>,
    /// JSON parameters of a simpler or equal model to start from.
    #[arg(long)]
    initial: Option<PathBuf>,
    /// Converged once a simplex restart improves the MSE by no more than this.
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
    /// Simplex iteration budget for each starting point.
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Where to write the fitted parameters (JSON); standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the report row (model,mse,r,a,k,b,iterations,converged).
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Parameter files are JSON: {"model":3,"r":0.083,"a":0.61,"k":0.058,"b":0.0098}.
#[derive(Debug, Args)]
struct PriceArgs {
    /// Model parameters (JSON).
    #[arg(long)]
    params: PathBuf,
    /// Last twelve months of revenue.
    #[arg(long)]
    ltm: f64,
    /// Last three years of revenue, annualized.
    #[arg(long)]
    lty: f64,
    /// Catalog age in years.
    #[arg(long)]
    age: f64,
    /// 10Y, 30Y or LOR.
    #[arg(long)]
    term: ContractTerm,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum HoldHorizon {
    #[value(name = "1y")]
    OneYear,
    #[value(name = "5y")]
    FiveYears,
}

impl HoldHorizon {
    fn quarters(self) -> u32 {
        match self {
            HoldHorizon::OneYear => 4,
            HoldHorizon::FiveYears => 20,
        }
    }
}

#[derive(Debug, Args)]
struct BacktestArgs {
    /// Model parameters (JSON) used to price entries and exits.
    #[arg(long)]
    params: PathBuf,
    /// Deals CSV; each asset is anchored on its earliest deal.
    #[arg(long)]
    deals: PathBuf,
    /// Quarterly revenues CSV (asset_id,quarter,amount).
    #[arg(long)]
    revenues: PathBuf,
    /// One or more entry years, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    entry_year: Vec<i32>,
    /// Holding period.
    #[arg(long, value_enum)]
    horizon: HoldHorizon,
    /// JSON cost schedule, e.g. {"buyer_fee":500,"seller_commission":0.08}.
    #[arg(long)]
    costs: Option<PathBuf>,
    /// Benchmark CSV (metric,2017,...,total_5yr,annualized_5yr) to compare against.
    #[arg(long)]
    benchmark: Option<PathBuf>,
    /// Directory for summary, results, skip report and manifest.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepArg {
    Ratio,
    Age,
}

impl From<SweepArg> for Sweep {
    fn from(s: SweepArg) -> Self {
        match s {
            SweepArg::Ratio => Sweep::Ratio,
            SweepArg::Age => Sweep::Age,
        }
    }
}

#[derive(Debug, Args)]
struct CurvesArgs {
    /// Model parameters (JSON).
    #[arg(long)]
    params: PathBuf,
    /// 10Y, 30Y or LOR.
    #[arg(long)]
    term: ContractTerm,
    /// Feature to vary.
    #[arg(long, value_enum)]
    sweep: SweepArg,
    /// LO:HI:STEP with LO <= HI and STEP > 0.
    #[arg(long, value_parser = parse_grid)]
    range: Grid,
    /// Age held fixed during a ratio sweep.
    #[arg(long, default_value_t = 20.0)]
    age: f64,
    /// LTM/LTY ratio held fixed during an age sweep.
    #[arg(long, default_value_t = 1.0)]
    ratio: f64,
    /// CSV destination; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// JSON parameters the data is generated from.
    #[arg(long)]
    theta: PathBuf,
    /// Number of deals (one per asset).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// Standard deviation of additive multiplier noise.
    #[arg(long, default_value_t = 0.0, value_parser = parse_non_negative)]
    noise: f64,
    /// Seed for the ChaCha8 generator; equal seeds give identical files.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Deals CSV destination.
    #[arg(long)]
    out_deals: PathBuf,
    /// Also write quarterly revenues; deals are then priced off these series.
    #[arg(long)]
    out_revenues: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    /// Manifest JSON written by an earlier run.
    #[arg(long)]
    manifest: PathBuf,
}

fn parse_grid(text: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, step] = parts[..] else {
        return Err("expected LO:HI:STEP".into());
    };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("`{s}` is not a number"))
    };
    let grid = Grid {
        lo: num(lo)?,
        hi: num(hi)?,
        step: num(step)?,
    };
    grid.points().map(|_| grid).map_err(|e| e.to_string())
}

fn parse_non_negative(text: &str) -> Result<f64, String> {
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(format!("`{text}` is not a non-negative number")),
    }
}

/// Exit code for a failed command.
pub fn exit_code(error: &Error) -> u8 {
    match error {
        Error::EmptyCohort { .. } => EXIT_EMPTY_COHORT,
        e if e.is_pricing_infeasible() => EXIT_INFEASIBLE,
        _ => EXIT_INPUT,
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let recorded: Vec<String> = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match commands::dispatch(cli.command, recorded) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
