use super::{IngestError, QualityFlags, WindRecord, WindSeries, CALM_THRESHOLD};
use crate::circular::{resultant, Angle, DEGENERATE_RESULTANT};
use chrono::{DateTime, Duration, Timelike, Utc};
use serde::{Deserialize, Serialize};

/// Boxcar average over fixed windows aligned to the Unix epoch. Speed is the
/// arithmetic mean; direction is the circular mean of the non-calm records
/// in the window, or absent if those cancel out. Output records are stamped
/// with the window start.
pub fn aggregate(series: &WindSeries, window: Duration) -> Result<WindSeries, IngestError> {
    let w = window.num_seconds();
    if w <= 0 {
        return Err(IngestError::InvalidArgument(format!("window must be positive, got {w} s")));
    }
    let mut out: Vec<WindRecord> = Vec::new();
    let mut i = 0;
    let recs = series.records();
    while i < recs.len() {
        let slot = recs[i].timestamp.timestamp().div_euclid(w);
        let mut j = i;
        while j < recs.len() && recs[j].timestamp.timestamp().div_euclid(w) == slot {
            j += 1;
        }
        let chunk = &recs[i..j];
        let speed = chunk.iter().map(|r| r.speed).sum::<f64>() / chunk.len() as f64;
        let dirs: Vec<Angle> = chunk.iter().filter_map(|r| r.direction).collect();
        let direction = if dirs.is_empty() {
            None
        } else {
            resultant(&dirs, None).ok().filter(|r| r.length > DEGENERATE_RESULTANT).map(|r| r.mean)
        };
        let t = DateTime::<Utc>::from_timestamp(slot * w, 0).expect("timestamp in range");
        let mut rec = WindRecord::new(t, speed, direction, CALM_THRESHOLD);
        rec.flags = QualityFlags { aggregated: true, ..rec.flags };
        out.push(rec);
        i = j;
    }
    let mut s = WindSeries::new(series.location.clone(), out)?;
    s.member = series.member.clone();
    s.height_m = series.height_m;
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourBin {
    pub hour: u32,
    /// `None` when no record falls in this hour.
    pub mean: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiurnalProfile {
    pub utc_offset_hours: i32,
    pub hours: Vec<HourBin>,
}

/// Mean speed by local hour of day, `utc_offset_hours` east of UTC.
pub fn diurnal_profile(series: &WindSeries, utc_offset_hours: i32) -> DiurnalProfile {
    let mut sum = [0.0; 24];
    let mut count = [0usize; 24];
    for r in series.records() {
        let h = (r.timestamp.hour() as i32 + utc_offset_hours).rem_euclid(24) as usize;
        sum[h] += r.speed;
        count[h] += 1;
    }
    let hours = (0..24)
        .map(|h| HourBin {
            hour: h as u32,
            mean: (count[h] > 0).then(|| sum[h] / count[h] as f64),
            count: count[h],
        })
        .collect();
    DiurnalProfile { utc_offset_hours, hours }
}

/// Joint frequency of direction sector and speed class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Windrose {
    /// Sector centres as bearings; the first sector is centred on north.
    pub sector_centers_deg: Vec<f64>,
    /// Class `k` spans `[edges[k-1], edges[k])`; the first starts at zero
    /// and the last is open-ended.
    pub speed_edges: Vec<f64>,
    /// `frequency[sector][class]`, as a fraction of records with a usable
    /// direction or a calm.
    pub frequency: Vec<Vec<f64>>,
    pub calm_fraction: f64,
    pub n: usize,
    /// Non-calm records without a direction; excluded from every fraction.
    pub missing_direction: usize,
}

pub fn windrose_table(series: &WindSeries, n_sectors: usize, speed_edges: &[f64]) -> Result<Windrose, IngestError> {
    if n_sectors == 0 {
        return Err(IngestError::InvalidArgument("need at least one sector".into()));
    }
    if speed_edges.iter().any(|e| !(e.is_finite() && *e > 0.0)) || speed_edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(IngestError::InvalidArgument("speed edges must be positive and increasing".into()));
    }
    let width = 360.0 / n_sectors as f64;
    let n_classes = speed_edges.len() + 1;
    let mut counts = vec![vec![0usize; n_classes]; n_sectors];
    let (mut calm, mut missing) = (0usize, 0usize);
    for r in series.records() {
        if r.flags.calm {
            calm += 1;
            continue;
        }
        let Some(d) = r.direction else {
            missing += 1;
            continue;
        };
        let sector = ((d.to_met_deg() + width / 2.0) / width).floor() as usize % n_sectors;
        let class = speed_edges.partition_point(|&e| e <= r.speed);
        counts[sector][class] += 1;
    }
    let used = series.len() - missing;
    let denom = used.max(1) as f64;
    Ok(Windrose {
        sector_centers_deg: (0..n_sectors).map(|k| k as f64 * width).collect(),
        speed_edges: speed_edges.to_vec(),
        frequency: counts.iter().map(|row| row.iter().map(|&c| c as f64 / denom).collect()).collect(),
        calm_fraction: calm as f64 / denom,
        n: series.len(),
        missing_direction: missing,
    })
}
