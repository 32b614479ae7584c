//! Internal variability of an initial-condition ensemble and the
//! robustness of projected changes against it.
//!
//! All spreads divide by the number of members. A projected change is
//! robust when the historical and future medians differ by strictly more
//! than twice the matching internal variability.

use crate::ingest::{filter_season, Season, WindSeries};
use crate::stats;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this many seasonal points an ensemble 95th quantile is flagged.
pub const MIN_Q95_POINTS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IvError {
    #[error("an ensemble needs at least 2 members, got {0}")]
    TooFewMembers(usize),
    #[error("member `{member}` is not aligned with the first member at record {index}")]
    Misaligned { member: String, index: usize },
    #[error("members come from different locations (`{0}` and `{1}`)")]
    LocationMismatch(String, String),
    #[error("no {0} records in the ensemble")]
    EmptySeason(Season),
    #[error("{season} holds {found} timestamps; at least {needed} are needed")]
    TooFewTimestamps { season: Season, found: usize, needed: usize },
    #[error("{period} series has no complete {season} season")]
    NoCompleteSeasons { period: &'static str, season: Season },
    #[error("cannot compare a {pcc} change with the internal variability of the {iv}")]
    StatisticMismatch { pcc: Statistic, iv: Statistic },
    #[error("change is for {pcc}, internal variability for {iv}")]
    SeasonMismatch { pcc: Season, iv: Season },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Mean,
    Sd,
    Q95,
}

impl Statistic {
    pub fn of(self, xs: &[f64]) -> f64 {
        match self {
            Statistic::Mean => stats::mean(xs),
            Statistic::Sd => stats::pop_sd(xs),
            Statistic::Q95 => stats::quantile(xs, 0.95),
        }
    }
}

impl std::fmt::Display for Statistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Statistic::Mean => "mean",
            Statistic::Sd => "sd",
            Statistic::Q95 => "q95",
        })
    }
}

impl std::str::FromStr for Statistic {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(Statistic::Mean),
            "sd" | "std" => Ok(Statistic::Sd),
            "q95" => Ok(Statistic::Q95),
            other => Err(format!("unknown statistic `{other}` (expected mean, sd or q95)")),
        }
    }
}

/// Where member standard deviations are centred.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdCentering {
    /// Each member about its own seasonal mean.
    #[default]
    MemberMean,
    /// Every member about the mean over all members and times.
    EnsembleMean,
}

/// Members of one location on a shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSeries {
    pub location: String,
    pub member_ids: Vec<String>,
    members: Vec<WindSeries>,
}

impl EnsembleSeries {
    pub fn new(members: Vec<WindSeries>) -> Result<Self, IvError> {
        if members.len() < 2 {
            return Err(IvError::TooFewMembers(members.len()));
        }
        let first = &members[0];
        let ids: Vec<String> = members
            .iter()
            .enumerate()
            .map(|(k, m)| m.member.clone().unwrap_or_else(|| format!("member{}", k + 1)))
            .collect();
        for (m, id) in members.iter().zip(&ids).skip(1) {
            if m.location != first.location {
                return Err(IvError::LocationMismatch(first.location.clone(), m.location.clone()));
            }
            let n = m.len().min(first.len());
            if let Some(i) = (0..n).find(|&i| m.records()[i].timestamp != first.records()[i].timestamp) {
                return Err(IvError::Misaligned { member: id.clone(), index: i });
            }
            if m.len() != first.len() {
                return Err(IvError::Misaligned { member: id.clone(), index: n });
            }
        }
        Ok(EnsembleSeries { location: first.location.clone(), member_ids: ids, members })
    }

    pub fn members(&self) -> &[WindSeries] {
        &self.members
    }

    /// Seasonal speeds as `table[member][time]`. Every timestamp in the
    /// season counts; there is no completeness rule here.
    pub fn seasonal_table(&self, season: Season) -> Vec<Vec<f64>> {
        self.members.iter().map(|m| filter_season(m, season).series.speeds()).collect()
    }
}

fn check_table(table: &[Vec<f64>], season: Season, needed: usize) -> Result<(), IvError> {
    let t = table[0].len();
    if t == 0 {
        return Err(IvError::EmptySeason(season));
    }
    if t < needed {
        return Err(IvError::TooFewTimestamps { season, found: t, needed });
    }
    Ok(())
}

/// Root time-mean of the squared ensemble spread at each timestamp.
pub fn iv_mean_table(table: &[Vec<f64>]) -> f64 {
    let n = table.len() as f64;
    let t = table[0].len();
    let mut acc = 0.0;
    for ti in 0..t {
        let m = table.iter().map(|row| row[ti]).sum::<f64>() / n;
        acc += table.iter().map(|row| (row[ti] - m).powi(2)).sum::<f64>() / n;
    }
    (acc / t as f64).sqrt()
}

/// Ensemble spread of the member standard deviations.
pub fn iv_sd_table(table: &[Vec<f64>], centering: SdCentering) -> f64 {
    let sds: Vec<f64> = match centering {
        SdCentering::MemberMean => table.iter().map(|row| stats::pop_sd(row)).collect(),
        SdCentering::EnsembleMean => {
            let count = (table.len() * table[0].len()) as f64;
            let grand = table.iter().flatten().sum::<f64>() / count;
            table
                .iter()
                .map(|row| (row.iter().map(|y| (y - grand).powi(2)).sum::<f64>() / row.len() as f64).sqrt())
                .collect()
        }
    };
    stats::pop_sd(&sds)
}

/// Ensemble spread of the member 95th quantiles.
pub fn iv_q95_table(table: &[Vec<f64>]) -> f64 {
    let qs: Vec<f64> = table.iter().map(|row| stats::quantile(row, 0.95)).collect();
    stats::pop_sd(&qs)
}

pub fn iv_mean(ens: &EnsembleSeries, season: Season) -> Result<f64, IvError> {
    let table = ens.seasonal_table(season);
    check_table(&table, season, 1)?;
    Ok(iv_mean_table(&table))
}

pub fn iv_sd(ens: &EnsembleSeries, season: Season, centering: SdCentering) -> Result<f64, IvError> {
    let table = ens.seasonal_table(season);
    check_table(&table, season, 2)?;
    Ok(iv_sd_table(&table, centering))
}

/// Also returns whether the season is shorter than [`MIN_Q95_POINTS`].
pub fn iv_q95(ens: &EnsembleSeries, season: Season) -> Result<(f64, bool), IvError> {
    let table = ens.seasonal_table(season);
    check_table(&table, season, 1)?;
    Ok((iv_q95_table(&table), table[0].len() < MIN_Q95_POINTS))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IVReport {
    pub location: String,
    pub season: Season,
    pub iv_mean: f64,
    pub iv_sd: f64,
    pub iv_q95: f64,
    pub members: usize,
    pub timestamps: usize,
    pub sd_centering: SdCentering,
    /// Set when the season is too short for a stable 95th quantile.
    pub q95_short_season: bool,
}

impl IVReport {
    pub fn value(&self, s: Statistic) -> f64 {
        match s {
            Statistic::Mean => self.iv_mean,
            Statistic::Sd => self.iv_sd,
            Statistic::Q95 => self.iv_q95,
        }
    }
}

pub fn iv_report(ens: &EnsembleSeries, season: Season, centering: SdCentering) -> Result<IVReport, IvError> {
    let table = ens.seasonal_table(season);
    check_table(&table, season, 2)?;
    Ok(IVReport {
        location: ens.location.clone(),
        season,
        iv_mean: iv_mean_table(&table),
        iv_sd: iv_sd_table(&table, centering),
        iv_q95: iv_q95_table(&table),
        members: table.len(),
        timestamps: table[0].len(),
        sd_centering: centering,
        q95_short_season: table[0].len() < MIN_Q95_POINTS,
    })
}

/// `median +/- IV` for one period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvBand {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PCCReport {
    pub location: String,
    pub season: Season,
    pub statistic: Statistic,
    pub hist_years: Vec<i32>,
    pub hist_values: Vec<f64>,
    pub fut_years: Vec<i32>,
    pub fut_values: Vec<f64>,
    /// `fut - hist` for every pair, historical year outermost.
    pub differences: Vec<f64>,
    /// Minimum, quartiles and maximum of `differences`.
    pub differences_summary: [f64; 5],
    pub median_hist: f64,
    pub median_fut: f64,
    pub iv: Option<f64>,
    pub robust: Option<bool>,
    pub hist_band: Option<IvBand>,
    pub fut_band: Option<IvBand>,
}

fn yearly(series: &WindSeries, season: Season, statistic: Statistic) -> (Vec<i32>, Vec<f64>) {
    filter_season(series, season)
        .by_year()
        .into_iter()
        .map(|(y, obs)| (y, statistic.of(&obs.iter().map(|o| o.speed).collect::<Vec<_>>())))
        .unzip()
}

/// Per season-year statistics of both periods and all their differences.
pub fn yearly_pcc(
    hist: &WindSeries,
    fut: &WindSeries,
    season: Season,
    statistic: Statistic,
) -> Result<PCCReport, IvError> {
    let (hist_years, hist_values) = yearly(hist, season, statistic);
    let (fut_years, fut_values) = yearly(fut, season, statistic);
    if hist_values.is_empty() {
        return Err(IvError::NoCompleteSeasons { period: "historical", season });
    }
    if fut_values.is_empty() {
        return Err(IvError::NoCompleteSeasons { period: "future", season });
    }
    let differences: Vec<f64> = hist_values.iter().flat_map(|h| fut_values.iter().map(move |f| f - h)).collect();
    Ok(PCCReport {
        location: hist.location.clone(),
        season,
        statistic,
        median_hist: stats::quantile(&hist_values, 0.5),
        median_fut: stats::quantile(&fut_values, 0.5),
        differences_summary: stats::five_number(&differences),
        hist_years,
        hist_values,
        fut_years,
        fut_values,
        differences,
        iv: None,
        robust: None,
        hist_band: None,
        fut_band: None,
    })
}

/// Robust iff `|median_hist - median_fut| > 2 iv`, strictly.
pub fn is_robust(median_hist: f64, median_fut: f64, iv: f64) -> bool {
    (median_hist - median_fut).abs() > 2.0 * iv
}

/// Attaches an internal variability value of the given statistic.
pub fn classify_robustness_with(pcc: &PCCReport, statistic: Statistic, iv: f64) -> Result<PCCReport, IvError> {
    if statistic != pcc.statistic {
        return Err(IvError::StatisticMismatch { pcc: pcc.statistic, iv: statistic });
    }
    let band = |m: f64| IvBand { lower: m - iv, upper: m + iv };
    Ok(PCCReport {
        iv: Some(iv),
        robust: Some(is_robust(pcc.median_hist, pcc.median_fut, iv)),
        hist_band: Some(band(pcc.median_hist)),
        fut_band: Some(band(pcc.median_fut)),
        ..pcc.clone()
    })
}

/// Uses the report's value matching the change's statistic.
pub fn classify_robustness(pcc: &PCCReport, iv: &IVReport) -> Result<PCCReport, IvError> {
    if pcc.season != iv.season {
        return Err(IvError::SeasonMismatch { pcc: pcc.season, iv: iv.season });
    }
    classify_robustness_with(pcc, pcc.statistic, iv.value(pcc.statistic))
}

/// One summary row per location: box statistics of the differences and
/// the `median +/- IV` bands of both periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PccSummaryRow {
    pub location: String,
    pub season: Season,
    pub statistic: Statistic,
    pub diff_min: f64,
    pub diff_q1: f64,
    pub diff_median: f64,
    pub diff_q3: f64,
    pub diff_max: f64,
    pub median_hist: f64,
    pub median_fut: f64,
    pub iv: f64,
    pub hist_lower: f64,
    pub hist_upper: f64,
    pub fut_lower: f64,
    pub fut_upper: f64,
    pub robust: bool,
}

impl PccSummaryRow {
    /// `None` until the report has been classified.
    pub fn from_report(r: &PCCReport) -> Option<Self> {
        let [diff_min, diff_q1, diff_median, diff_q3, diff_max] = r.differences_summary;
        let (hb, fb) = (r.hist_band?, r.fut_band?);
        Some(PccSummaryRow {
            location: r.location.clone(),
            season: r.season,
            statistic: r.statistic,
            diff_min,
            diff_q1,
            diff_median,
            diff_q3,
            diff_max,
            median_hist: r.median_hist,
            median_fut: r.median_fut,
            iv: r.iv?,
            hist_lower: hb.lower,
            hist_upper: hb.upper,
            fut_lower: fb.lower,
            fut_upper: fb.upper,
            robust: r.robust?,
        })
    }
}
