//! Command-line surface. Every argument struct is `Serialize` so the
//! resolved configuration can be echoed into the run manifest.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;
use windcond::ingest::Season;

#[derive(Debug, Parser)]
#[command(
    name = "windcond",
    version,
    about = "Conditional wind speed and direction statistics",
    long_about = "Fits direction mixtures and direction-dependent speed quantiles to \
                  wind time series, puts seasonal block bootstrap bands on them, and \
                  compares projected changes with ensemble internal variability.\n\n\
                  Input is CSV with columns timestamp, speed_ms, direction_deg and \
                  optional member, location and height_m. Directions are meteorological \
                  bearings (where the wind blows from, clockwise from north).\n\n\
                  Exit codes: 0 success, 2 configuration error, 3 data error, \
                  4 numerical failure. Errors are also printed to stderr as JSON."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a von Mises mixture to seasonal wind directions.
    FitDirection(FitDirectionArgs),
    /// Fit direction-dependent speed quantiles by quantile regression or Weibull regression.
    FitSpeed(FitSpeedArgs),
    /// Seasonal block bootstrap bands for a statistic.
    Bootstrap(BootstrapArgs),
    /// Internal variability of an ensemble.
    Iv(IvArgs),
    /// Projected change between a historical and a future period, classified against internal variability.
    Pcc(PccArgs),
    /// Diurnal profile and windrose tables.
    Summarize(SummarizeArgs),
    /// Write a synthetic two-location, two-decade ensemble dataset.
    Synth(SynthArgs),
    /// Print the manual page (roff) to stdout.
    Manpage,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::FitDirection(_) => "fit-direction",
            Command::FitSpeed(_) => "fit-speed",
            Command::Bootstrap(_) => "bootstrap",
            Command::Iv(_) => "iv",
            Command::Pcc(_) => "pcc",
            Command::Summarize(_) => "summarize",
            Command::Synth(_) => "synth",
            Command::Manpage => "manpage",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeedUnitArg {
    Ms,
    Knots,
    Mph,
    Kmh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionUnitArg {
    MetDeg,
    Radians,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long, short, env = "WINDCOND_OUT_DIR", default_value = "windcond-out")]
    pub out: PathBuf,
    /// Write numbers at full precision instead of 6 significant digits.
    #[arg(long)]
    pub full_precision: bool,
}

/// How records are read and cleaned.
#[derive(Debug, Clone, Args, Serialize)]
pub struct IngestArgs {
    /// Speeds below this (m/s) are calm and carry no direction.
    #[arg(long, default_value_t = 0.1)]
    pub calm: f64,
    #[arg(long, value_enum, default_value = "ms")]
    pub speed_unit: SpeedUnitArg,
    #[arg(long, value_enum, default_value = "met-deg")]
    pub direction_unit: DirectionUnitArg,
    /// Boxcar-average records over windows of this many minutes before anything else.
    #[arg(long)]
    pub aggregate_minutes: Option<i64>,
    /// Power-law adjust speeds to this height (m); needs a height_m column.
    #[arg(long)]
    pub target_height: Option<f64>,
    /// Power-law exponent used with --target-height.
    #[arg(long, default_value_t = 0.11)]
    pub shear_exponent: f64,
}

/// Input files and which series to use from them.
#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// CSV input files (repeatable).
    #[arg(long = "input", short, required = true)]
    pub inputs: Vec<PathBuf>,
    /// Keep only this location.
    #[arg(long)]
    pub location: Option<String>,
    /// Keep only this ensemble member.
    #[arg(long)]
    pub member: Option<String>,
}

fn parse_season(s: &str) -> Result<Season, String> {
    s.parse()
}

fn parse_tau(s: &str) -> Result<f64, String> {
    let t: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if t > 0.0 && t < 1.0 {
        Ok(t)
    } else {
        Err(format!("quantile level {t} is outside (0, 1)"))
    }
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let a: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if a > 0.0 && a < 1.0 {
        Ok(a)
    } else {
        Err(format!("alpha {a} is outside (0, 1)"))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitDirectionArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub ingest: IngestArgs,
    /// Season: djf, mam, jja or son.
    #[arg(long, value_parser = parse_season)]
    pub season: Season,
    /// Number of mixture components.
    #[arg(long, default_value_t = 2)]
    pub components: usize,
    /// Seed for the EM random restarts.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeedMethod {
    /// Quantile regression on a periodic B-spline basis.
    Qr,
    /// Per-sector Weibull fits smoothed by harmonic regression.
    Weibull,
}

/// Model settings shared by fit-speed and bootstrap.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SpeedModelArgs {
    /// Spline degrees of freedom for quantile regression.
    #[arg(long, default_value_t = 8)]
    pub df: usize,
    /// Spline degree for quantile regression.
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    /// Direction sectors for the Weibull method.
    #[arg(long, default_value_t = 16)]
    pub bins: usize,
    /// Sectors with fewer observations are left out of the harmonic fit.
    #[arg(long, default_value_t = 30)]
    pub min_count: usize,
    /// Harmonics in the Weibull scale and shape regressions.
    #[arg(long, default_value_t = 3)]
    pub harmonics: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitSpeedArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub ingest: IngestArgs,
    #[arg(long, value_parser = parse_season)]
    pub season: Season,
    #[arg(long, value_enum, default_value = "qr")]
    pub method: SpeedMethod,
    /// Quantile levels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.75,0.95", value_parser = parse_tau)]
    pub taus: Vec<f64>,
    #[command(flatten)]
    pub model: SpeedModelArgs,
    /// Choose --df by the elbow rule over these candidates (comma separated, ascending).
    #[arg(long, value_delimiter = ',')]
    pub select_df: Option<Vec<usize>>,
    /// Quantile level used when choosing df.
    #[arg(long, default_value = "0.5", value_parser = parse_tau)]
    pub elbow_tau: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BootStatistic {
    VmDensity,
    WeibullQuantile,
    QrQuantile,
    Mean,
    Sd,
    Q95,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub ingest: IngestArgs,
    #[arg(long, value_parser = parse_season)]
    pub season: Season,
    #[arg(long, value_enum)]
    pub statistic: BootStatistic,
    /// Quantile level for the quantile statistics.
    #[arg(long, default_value = "0.95", value_parser = parse_tau)]
    pub tau: f64,
    /// Bootstrap replicates.
    #[arg(long, default_value_t = windcond::bootstrap::DEFAULT_REPLICATES)]
    pub replicates: usize,
    /// Bands cover 1 - alpha.
    #[arg(long, default_value = "0.05", value_parser = parse_alpha)]
    pub alpha: f64,
    /// Seed for block draws (and EM restarts).
    #[arg(long)]
    pub seed: u64,
    /// Mixture components for vm-density.
    #[arg(long, default_value_t = 2)]
    pub components: usize,
    #[command(flatten)]
    pub model: SpeedModelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Centering {
    /// Each member's standard deviation about its own mean.
    Member,
    /// Every member centred on the grand ensemble mean.
    Ensemble,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IvArgs {
    /// Ensemble CSV files; members sharing a location form one ensemble.
    #[arg(long = "input", short, required = true)]
    pub inputs: Vec<PathBuf>,
    /// Keep only this location.
    #[arg(long)]
    pub location: Option<String>,
    #[command(flatten)]
    pub ingest: IngestArgs,
    #[arg(long, value_parser = parse_season)]
    pub season: Season,
    #[arg(long, value_enum, default_value = "member")]
    pub sd_centering: Centering,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticArg {
    Mean,
    Sd,
    Q95,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PccArgs {
    /// Historical-period CSV files.
    #[arg(long, required = true)]
    pub hist: Vec<PathBuf>,
    /// Future-period CSV files.
    #[arg(long, required = true)]
    pub fut: Vec<PathBuf>,
    /// Keep only this location.
    #[arg(long)]
    pub location: Option<String>,
    /// Member used for the yearly statistics; defaults to the first member of each location.
    #[arg(long)]
    pub member: Option<String>,
    #[command(flatten)]
    pub ingest: IngestArgs,
    #[arg(long, value_parser = parse_season)]
    pub season: Season,
    #[arg(long, value_enum)]
    pub statistic: StatisticArg,
    /// iv.json written by `windcond iv`.
    #[arg(long, conflicts_with = "ensemble", required_unless_present = "ensemble")]
    pub iv: Option<PathBuf>,
    /// Compute the internal variability inline from these ensemble CSV files.
    #[arg(long)]
    pub ensemble: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "member")]
    pub sd_centering: Centering,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SummarizeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub ingest: IngestArgs,
    /// Restrict to one season; all records otherwise.
    #[arg(long, value_parser = parse_season)]
    pub season: Option<Season>,
    /// Hours east of UTC for the diurnal profile.
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    pub utc_offset: i32,
    #[arg(long, default_value_t = 16)]
    pub sectors: usize,
    /// Windrose speed class edges (m/s), comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2,4,6,8,10,12,15,20")]
    pub speed_edges: Vec<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: u64,
    /// Ensemble members per location.
    #[arg(long, default_value_t = 4)]
    pub members: usize,
    /// Years per period.
    #[arg(long, default_value_t = 10)]
    pub years: i32,
    /// Hours between records.
    #[arg(long, default_value_t = 3)]
    pub step_hours: i64,
    #[command(flatten)]
    pub output: OutputArgs,
}
