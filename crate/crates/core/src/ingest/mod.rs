//! Point wind time series: data model, seasons, height adjustment.
//!
//! A [`WindSeries`] holds strictly time-ordered [`WindRecord`]s for one
//! location (and optionally one ensemble member). Records slower than
//! [`CALM_THRESHOLD`] are calm: they keep their speed but carry no
//! direction. Gaps are preserved as-is.

mod csv_io;
mod summary;

pub use csv_io::{read_csv, read_csv_multi, write_csv, CsvSchema, DirectionUnit, IngestReport, Rejection, SpeedUnit};
pub use summary::{aggregate, diurnal_profile, windrose_table, DiurnalProfile, HourBin, Windrose};

use crate::circular::Angle;
use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Speeds below this (m/s) are calm and have no direction.
pub const CALM_THRESHOLD: f64 = 0.1;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("{rejected} of {total} rows rejected (first: line {first_line}: {first_reason})")]
    TooManyRejected { rejected: usize, total: usize, first_line: usize, first_reason: String },
    #[error("no rows accepted")]
    Empty,
    #[error("timestamps must be strictly increasing (record {index})")]
    Unordered { index: usize },
    #[error("input holds {0} series; select one by location/member")]
    MultipleSeries(usize),
    #[error("series has no recorded measurement height")]
    MissingHeight,
    #[error("heights must be positive (source {source_height}, target {target})")]
    InvalidHeight { source_height: f64, target: f64 },
    #[error("invalid speed {0}")]
    InvalidSpeed(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Speed and direction without a timestamp; what the fitting code consumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub speed: f64,
    pub direction: Option<Angle>,
}

impl Observation {
    pub fn new(speed: f64, direction: Option<Angle>) -> Self {
        Observation { speed, direction }
    }
}

/// Split non-calm observations into parallel direction and speed vectors.
pub fn directional_pairs(obs: &[Observation], calm_threshold: f64) -> (Vec<Angle>, Vec<f64>) {
    obs.iter()
        .filter(|o| o.speed >= calm_threshold)
        .filter_map(|o| o.direction.map(|d| (d, o.speed)))
        .unzip()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityFlags {
    pub calm: bool,
    /// Non-calm record whose direction was absent or unparseable.
    pub direction_missing: bool,
    /// Produced by [`aggregate`].
    pub aggregated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindRecord {
    pub timestamp: DateTime<Utc>,
    pub speed: f64,
    pub direction: Option<Angle>,
    pub flags: QualityFlags,
}

impl WindRecord {
    /// Applies the calm rule: below `calm_threshold` the direction is dropped.
    pub fn new(timestamp: DateTime<Utc>, speed: f64, direction: Option<Angle>, calm_threshold: f64) -> Self {
        let calm = speed < calm_threshold;
        let flags = QualityFlags {
            calm,
            direction_missing: !calm && direction.is_none(),
            aggregated: false,
        };
        WindRecord { timestamp, speed, direction: if calm { None } else { direction }, flags }
    }

    pub fn observation(&self) -> Observation {
        Observation { speed: self.speed, direction: self.direction }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindSeries {
    pub location: String,
    pub member: Option<String>,
    /// Measurement height above ground, metres.
    pub height_m: Option<f64>,
    records: Vec<WindRecord>,
}

impl WindSeries {
    pub fn new(location: impl Into<String>, records: Vec<WindRecord>) -> Result<Self, IngestError> {
        for (i, w) in records.windows(2).enumerate() {
            if w[1].timestamp <= w[0].timestamp {
                return Err(IngestError::Unordered { index: i + 1 });
            }
        }
        if let Some(r) = records.iter().find(|r| !(r.speed.is_finite() && r.speed >= 0.0)) {
            return Err(IngestError::InvalidSpeed(r.speed));
        }
        Ok(WindSeries { location: location.into(), member: None, height_m: None, records })
    }

    pub fn with_height(mut self, h: f64) -> Self {
        self.height_m = Some(h);
        self
    }

    pub fn with_member(mut self, m: impl Into<String>) -> Self {
        self.member = Some(m.into());
        self
    }

    pub fn records(&self) -> &[WindRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.records.iter().map(WindRecord::observation).collect()
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.speed).collect()
    }

    /// Median spacing between consecutive records, in seconds.
    pub fn cadence_seconds(&self) -> Option<i64> {
        let mut d: Vec<i64> = self
            .records
            .windows(2)
            .map(|w| (w[1].timestamp - w[0].timestamp).num_seconds())
            .collect();
        if d.is_empty() {
            return None;
        }
        d.sort_unstable();
        Some(d[d.len() / 2])
    }

    fn with_records(&self, records: Vec<WindRecord>) -> WindSeries {
        WindSeries {
            location: self.location.clone(),
            member: self.member.clone(),
            height_m: self.height_m,
            records,
        }
    }
}

/// Three-month climatological seasons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Djf,
    Mam,
    Jja,
    Son,
}

impl Season {
    pub const ALL: [Season; 4] = [Season::Djf, Season::Mam, Season::Jja, Season::Son];

    pub fn months(self) -> [u32; 3] {
        match self {
            Season::Djf => [12, 1, 2],
            Season::Mam => [3, 4, 5],
            Season::Jja => [6, 7, 8],
            Season::Son => [9, 10, 11],
        }
    }

    /// Season-year of `t` if it falls in this season. December belongs to
    /// the following year's winter.
    pub fn season_year(self, t: &DateTime<Utc>) -> Option<i32> {
        let m = t.month();
        if !self.months().contains(&m) {
            return None;
        }
        Some(if self == Season::Djf && m == 12 { t.year() + 1 } else { t.year() })
    }

    pub fn name(self) -> &'static str {
        match self {
            Season::Djf => "djf",
            Season::Mam => "mam",
            Season::Jja => "jja",
            Season::Son => "son",
        }
    }
}

impl std::str::FromStr for Season {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "djf" | "winter" => Ok(Season::Djf),
            "mam" | "spring" => Ok(Season::Mam),
            "jja" | "summer" => Ok(Season::Jja),
            "son" | "autumn" | "fall" => Ok(Season::Son),
            other => Err(format!("unknown season `{other}` (expected djf, mam, jja or son)")),
        }
    }
}

impl std::fmt::Display for Season {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name().to_uppercase())
    }
}

/// The records of one season, each tagged with its season-year.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalSeries {
    pub season: Season,
    pub series: WindSeries,
    /// Season-year of each record, parallel to `series.records()`.
    pub season_years: Vec<i32>,
    /// Season-years with data in every calendar month of the season.
    pub complete_years: Vec<i32>,
    /// Season-years missing at least one month, typically at record edges.
    pub truncated_years: Vec<i32>,
}

impl SeasonalSeries {
    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Contiguous index range of each complete season-year, in order.
    pub fn year_blocks(&self) -> Vec<(i32, std::ops::Range<usize>)> {
        let mut out: Vec<(i32, std::ops::Range<usize>)> = Vec::new();
        for (i, &y) in self.season_years.iter().enumerate() {
            if !self.complete_years.contains(&y) {
                continue;
            }
            match out.last_mut() {
                Some((last, r)) if *last == y && r.end == i => r.end = i + 1,
                _ => out.push((y, i..i + 1)),
            }
        }
        out
    }

    /// Observations grouped by complete season-year.
    pub fn by_year(&self) -> Vec<(i32, Vec<Observation>)> {
        self.year_blocks()
            .into_iter()
            .map(|(y, r)| (y, self.series.records()[r].iter().map(WindRecord::observation).collect()))
            .collect()
    }

    /// Observations of the complete season-years only.
    pub fn complete_observations(&self) -> Vec<Observation> {
        self.by_year().into_iter().flat_map(|(_, o)| o).collect()
    }
}

/// Keeps the records whose calendar month lies in `season`.
pub fn filter_season(series: &WindSeries, season: Season) -> SeasonalSeries {
    let mut records = Vec::new();
    let mut years = Vec::new();
    let mut months: BTreeMap<i32, [bool; 3]> = BTreeMap::new();
    let month_ix = |m: u32| season.months().iter().position(|&x| x == m).unwrap();
    for r in series.records() {
        if let Some(y) = season.season_year(&r.timestamp) {
            records.push(r.clone());
            years.push(y);
            months.entry(y).or_default()[month_ix(r.timestamp.month())] = true;
        }
    }
    let (complete, truncated): (Vec<_>, Vec<_>) = months.iter().partition(|(_, m)| m.iter().all(|&b| b));
    SeasonalSeries {
        season,
        series: series.with_records(records),
        season_years: years,
        complete_years: complete.into_iter().map(|(y, _)| *y).collect(),
        truncated_years: truncated.into_iter().map(|(y, _)| *y).collect(),
    }
}

/// Power-law height adjustment: speeds scale by `(target / source)^alpha`.
pub fn adjust_height(series: &WindSeries, target_m: f64, alpha: f64) -> Result<WindSeries, IngestError> {
    let source = series.height_m.ok_or(IngestError::MissingHeight)?;
    if !(source > 0.0 && target_m > 0.0) {
        return Err(IngestError::InvalidHeight { source_height: source, target: target_m });
    }
    let factor = (target_m / source).powf(alpha);
    let records = series
        .records()
        .iter()
        .map(|r| WindRecord { speed: r.speed * factor, ..r.clone() })
        .collect();
    let mut out = series.with_records(records);
    out.height_m = Some(target_m);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    pub(crate) fn ts(y: i32, m: u32, d: u32, h: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(y, m, d, h, 0, 0).unwrap()
    }

    fn three_hourly(from: DateTime<Utc>, to: DateTime<Utc>) -> WindSeries {
        let mut recs = Vec::new();
        let mut t = from;
        let mut i = 0;
        while t < to {
            let dir = Angle::new(i as f64 * 0.1).unwrap();
            recs.push(WindRecord::new(t, 3.0 + (i % 5) as f64, Some(dir), CALM_THRESHOLD));
            t += chrono::Duration::hours(3);
            i += 1;
        }
        WindSeries::new("x", recs).unwrap()
    }

    #[test]
    fn season_year_rule() {
        assert_eq!(Season::Djf.season_year(&ts(1995, 12, 15, 0)), Some(1996));
        assert_eq!(Season::Djf.season_year(&ts(1996, 2, 1, 0)), Some(1996));
        assert_eq!(Season::Jja.season_year(&ts(1995, 7, 1, 0)), Some(1995));
        assert_eq!(Season::Jja.season_year(&ts(1995, 12, 1, 0)), None);
        assert_eq!("winter".parse::<Season>().unwrap(), Season::Djf);
        assert!("xyz".parse::<Season>().is_err());
    }

    #[test]
    fn decade_counts_complete_and_truncated() {
        let s = three_hourly(ts(1995, 1, 1, 0), ts(2005, 1, 1, 0));
        let djf = filter_season(&s, Season::Djf);
        assert_eq!(djf.complete_years, (1996..=2004).collect::<Vec<_>>());
        assert_eq!(djf.truncated_years, vec![1995, 2005]);
        let jja = filter_season(&s, Season::Jja);
        assert_eq!(jja.complete_years.len(), 10);
        assert!(jja.truncated_years.is_empty());
        let full = three_hourly(ts(1994, 12, 1, 0), ts(2004, 3, 1, 0));
        assert_eq!(filter_season(&full, Season::Djf).complete_years.len(), 10);
        let blocks = djf.year_blocks();
        assert_eq!(blocks.len(), 9);
        assert!(blocks.windows(2).all(|w| w[0].1.end <= w[1].1.start));
    }

    #[test]
    fn seasons_partition_the_series() {
        let s = three_hourly(ts(2000, 1, 1, 0), ts(2001, 6, 1, 0));
        let mut seen: Vec<DateTime<Utc>> = Season::ALL
            .iter()
            .flat_map(|&q| filter_season(&s, q).series.records().iter().map(|r| r.timestamp).collect::<Vec<_>>())
            .collect();
        seen.sort();
        let all: Vec<_> = s.records().iter().map(|r| r.timestamp).collect();
        assert_eq!(seen, all);
    }

    #[test]
    fn height_adjustment() {
        let s = three_hourly(ts(2000, 1, 1, 0), ts(2000, 1, 3, 0)).with_height(5.0);
        let same = adjust_height(&s, 5.0, 0.11).unwrap();
        assert_eq!(same.speeds(), s.speeds());
        let up = adjust_height(&s, 10.0, 0.11).unwrap();
        let f = 2f64.powf(0.11);
        assert!((f - 1.0793).abs() < 1e-4);
        for (a, b) in up.speeds().iter().zip(s.speeds()) {
            assert_eq!(*a, b * f);
        }
        assert_eq!(up.height_m, Some(10.0));
        assert_eq!(up.records()[3].direction, s.records()[3].direction);
        let flat = adjust_height(&s, 80.0, 0.0).unwrap();
        assert_eq!(flat.speeds(), s.speeds());
        let no_h = three_hourly(ts(2000, 1, 1, 0), ts(2000, 1, 2, 0));
        assert!(matches!(adjust_height(&no_h, 10.0, 0.1), Err(IngestError::MissingHeight)));
        // composition
        let s10 = s.clone().with_height(10.0);
        let two_step = adjust_height(&adjust_height(&s10, 50.0, 0.14).unwrap(), 100.0, 0.14).unwrap();
        let direct = adjust_height(&s10, 100.0, 0.14).unwrap();
        for (a, b) in two_step.speeds().iter().zip(direct.speeds()) {
            assert!((a - b).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn calm_records_drop_direction() {
        let r = WindRecord::new(ts(2000, 1, 1, 0), 0.05, Some(Angle::new(1.0).unwrap()), CALM_THRESHOLD);
        assert!(r.flags.calm && r.direction.is_none());
        let r = WindRecord::new(ts(2000, 1, 1, 0), 2.0, None, CALM_THRESHOLD);
        assert!(r.flags.direction_missing);
    }

    #[test]
    fn series_rejects_disorder() {
        let a = WindRecord::new(ts(2000, 1, 1, 3), 1.0, None, 0.1);
        let b = WindRecord::new(ts(2000, 1, 1, 0), 1.0, None, 0.1);
        assert!(matches!(WindSeries::new("x", vec![a, b]), Err(IngestError::Unordered { index: 1 })));
    }
}
