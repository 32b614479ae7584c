//! Seasonal block bootstrap.
//!
//! Each complete season-year is one block. A replicate draws as many blocks
//! as the original, with replacement, concatenates them and refits. Bands are
//! percentile intervals of the replicate values; curve statistics are
//! recorded on the bearings `0, 1, ..., 359` degrees.

use crate::circular::{met_grid, Angle, PeriodicSplineBasis};
use crate::ingest::{directional_pairs, Observation, Season, SeasonalSeries, CALM_THRESHOLD};
use crate::quantreg::fit_quantile_curve_pairs;
use crate::stats;
use crate::vonmises::{fit_vm_mixture_em, EmConfig};
use crate::weibull::{bin_directional, fit_weibull_harmonic, BinningConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::ops::Range;
use thiserror::Error;

/// Replicate count used unless overridden.
pub const DEFAULT_REPLICATES: usize = 500;
/// Bands are refused when more replicates than this fraction fail.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BootstrapError {
    #[error("{found} complete {season} seasons; the block bootstrap needs at least 2")]
    InsufficientSeasons { season: Season, found: usize },
    #[error("replicate count must be positive")]
    NoReplicates,
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("{failures} of {replicates} replicates failed (first: {first_error}); band is unreliable")]
    UnreliableBand { failures: usize, replicates: usize, first_error: String },
    #[error("estimator failed on the original sample: {0}")]
    PointEstimate(String),
}

/// Block layout and resampling settings for one seasonal subseries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPlan {
    pub season: Season,
    /// Record ranges within the seasonal subseries, one per complete season-year.
    pub blocks: Vec<Range<usize>>,
    pub years: Vec<i32>,
    pub replicates: usize,
    pub seed: u64,
}

pub fn make_block_plan(seasonal: &SeasonalSeries, replicates: usize, seed: u64) -> Result<BlockPlan, BootstrapError> {
    if replicates == 0 {
        return Err(BootstrapError::NoReplicates);
    }
    let (years, blocks): (Vec<i32>, Vec<Range<usize>>) = seasonal.year_blocks().into_iter().unzip();
    if blocks.len() < 2 {
        return Err(BootstrapError::InsufficientSeasons { season: seasonal.season, found: blocks.len() });
    }
    Ok(BlockPlan { season: seasonal.season, blocks, years, replicates, seed })
}

impl BlockPlan {
    /// Block indices drawn by replicate `b`. Each replicate owns stream `b`
    /// of the seeded generator, so draws do not depend on scheduling.
    pub fn draw(&self, b: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(b as u64);
        (0..self.blocks.len()).map(|_| rng.random_range(0..self.blocks.len())).collect()
    }

    /// Observations of replicate `b`, blocks concatenated in draw order.
    pub fn resample(&self, obs: &[Observation], b: usize) -> Vec<Observation> {
        self.draw(b).into_iter().flat_map(|k| obs[self.blocks[k].clone()].iter().copied()).collect()
    }

    /// Observations of all blocks in their original order.
    pub fn original(&self, obs: &[Observation]) -> Vec<Observation> {
        self.blocks.iter().flat_map(|r| obs[r.clone()].iter().copied()).collect()
    }
}

/// Statistics the bootstrap knows how to refit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    /// Density of an `components`-term von Mises mixture.
    VmDensity { components: usize, em: EmConfig },
    /// Two-stage Weibull regression quantile.
    WeibullQuantile { tau: f64, binning: BinningConfig, harmonics: usize },
    /// Spline quantile regression curve.
    QrQuantile { tau: f64, basis: PeriodicSplineBasis },
    Mean,
    Sd,
    Q95,
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::VmDensity { .. } => "vm_density",
            Estimator::WeibullQuantile { .. } => "weibull_quantile",
            Estimator::QrQuantile { .. } => "qr_quantile",
            Estimator::Mean => "mean",
            Estimator::Sd => "sd",
            Estimator::Q95 => "q95",
        }
    }

    pub fn tau(&self) -> Option<f64> {
        match self {
            Estimator::WeibullQuantile { tau, .. } | Estimator::QrQuantile { tau, .. } => Some(*tau),
            _ => None,
        }
    }

    pub fn is_curve(&self) -> bool {
        self.tau().is_some() || matches!(self, Estimator::VmDensity { .. })
    }

    /// Evaluates the statistic: one value for scalars, 360 grid values for curves.
    pub fn evaluate(&self, obs: &[Observation]) -> Result<Vec<f64>, String> {
        let grid: Vec<Angle> = met_grid(360).into_iter().map(|(_, a)| a).collect();
        let speeds = || obs.iter().map(|o| o.speed).collect::<Vec<f64>>();
        match self {
            Estimator::Mean => Ok(vec![stats::mean(&speeds())]),
            Estimator::Sd => Ok(vec![stats::pop_sd(&speeds())]),
            Estimator::Q95 => Ok(vec![stats::quantile(&speeds(), 0.95)]),
            Estimator::VmDensity { components, em } => {
                let (dirs, _) = directional_pairs(obs, CALM_THRESHOLD);
                let fit = fit_vm_mixture_em(&dirs, *components, em).map_err(|e| e.to_string())?;
                Ok(grid.iter().map(|&a| fit.mixture.density(a)).collect())
            }
            Estimator::WeibullQuantile { tau, binning, harmonics } => {
                let binned = bin_directional(obs, binning).map_err(|e| e.to_string())?;
                let model = fit_weibull_harmonic(&binned, *harmonics).map_err(|e| e.to_string())?;
                grid.iter().map(|&a| model.quantile(a, *tau).map_err(|e| e.to_string())).collect()
            }
            Estimator::QrQuantile { tau, basis } => {
                let (dirs, sp) = directional_pairs(obs, CALM_THRESHOLD);
                let c = fit_quantile_curve_pairs(&dirs, &sp, *tau, basis).map_err(|e| e.to_string())?;
                Ok(grid.iter().map(|&a| c.eval(a)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapBand {
    pub statistic: String,
    pub tau: Option<f64>,
    pub alpha: f64,
    pub replicates: usize,
    pub failures: usize,
    /// Bearings of the curve grid; `None` for scalar statistics.
    pub grid_deg: Option<Vec<f64>>,
    pub lower: Vec<f64>,
    pub point: Vec<f64>,
    pub upper: Vec<f64>,
    /// Successful replicate values, keyed by replicate index.
    pub samples: Vec<(usize, Vec<f64>)>,
    /// Grid points where the point estimate falls outside the band.
    pub point_outside: usize,
}

impl BootstrapBand {
    /// Percentile envelopes at another level from the same replicates.
    pub fn at_alpha(&self, alpha: f64) -> Result<BootstrapBand, BootstrapError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(BootstrapError::InvalidAlpha(alpha));
        }
        let (lower, upper) = envelopes(&self.samples, self.point.len(), alpha);
        let point_outside = count_outside(&lower, &self.point, &upper);
        Ok(BootstrapBand { alpha, lower, upper, point_outside, ..self.clone() })
    }

    /// `{statistic, tau?, alpha, B, failures, grid_deg, lower, point, upper}`;
    /// scalar statistics carry plain numbers and no grid.
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "statistic": self.statistic,
            "alpha": self.alpha,
            "B": self.replicates,
            "failures": self.failures,
        });
        let m = v.as_object_mut().expect("object");
        if let Some(t) = self.tau {
            m.insert("tau".into(), json!(t));
        }
        match &self.grid_deg {
            Some(g) => {
                m.insert("grid_deg".into(), json!(g));
                m.insert("lower".into(), json!(self.lower));
                m.insert("point".into(), json!(self.point));
                m.insert("upper".into(), json!(self.upper));
            }
            None => {
                m.insert("lower".into(), json!(self.lower[0]));
                m.insert("point".into(), json!(self.point[0]));
                m.insert("upper".into(), json!(self.upper[0]));
            }
        }
        v
    }
}

fn envelopes(samples: &[(usize, Vec<f64>)], len: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let mut lower = Vec::with_capacity(len);
    let mut upper = Vec::with_capacity(len);
    let mut col = Vec::with_capacity(samples.len());
    for k in 0..len {
        col.clear();
        col.extend(samples.iter().map(|(_, v)| v[k]));
        col.sort_by(f64::total_cmp);
        lower.push(stats::quantile_sorted(&col, alpha / 2.0));
        upper.push(stats::quantile_sorted(&col, 1.0 - alpha / 2.0));
    }
    (lower, upper)
}

fn count_outside(lower: &[f64], point: &[f64], upper: &[f64]) -> usize {
    (0..point.len()).filter(|&k| point[k] < lower[k] || point[k] > upper[k]).count()
}

/// Runs every replicate of `plan` on `seasonal` and forms `100 (1 - alpha)%`
/// percentile bands. Replicates run in parallel; the result depends only on
/// the inputs and the plan's seed.
pub fn bootstrap_statistic(
    plan: &BlockPlan,
    seasonal: &SeasonalSeries,
    estimator: &Estimator,
    alpha: f64,
) -> Result<BootstrapBand, BootstrapError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(BootstrapError::InvalidAlpha(alpha));
    }
    let obs = seasonal.series.observations();
    let point = estimator.evaluate(&plan.original(&obs)).map_err(BootstrapError::PointEstimate)?;
    let results: Vec<(usize, Result<Vec<f64>, String>)> = (0..plan.replicates)
        .into_par_iter()
        .map(|b| (b, estimator.evaluate(&plan.resample(&obs, b))))
        .collect();
    let mut samples = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for (b, r) in results {
        match r {
            Ok(v) if v.iter().all(|x| x.is_finite()) => samples.push((b, v)),
            Ok(_) => errors.push((b, "non-finite statistic".to_string())),
            Err(e) => errors.push((b, e)),
        }
    }
    if errors.len() as f64 > MAX_FAILURE_FRACTION * plan.replicates as f64 || samples.is_empty() {
        return Err(BootstrapError::UnreliableBand {
            failures: errors.len(),
            replicates: plan.replicates,
            first_error: errors.first().map(|e| e.1.clone()).unwrap_or_default(),
        });
    }
    let (lower, upper) = envelopes(&samples, point.len(), alpha);
    let point_outside = count_outside(&lower, &point, &upper);
    Ok(BootstrapBand {
        statistic: estimator.name().to_string(),
        tau: estimator.tau(),
        alpha,
        replicates: plan.replicates,
        failures: errors.len(),
        grid_deg: estimator.is_curve().then(|| met_grid(360).into_iter().map(|(d, _)| d).collect()),
        lower,
        point,
        upper,
        samples,
        point_outside,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{filter_season, WindRecord, WindSeries};
    use chrono::{Duration, TimeZone, Utc};

    fn series(years: i32, speed: impl Fn(usize) -> f64) -> WindSeries {
        let mut t = Utc.with_ymd_and_hms(2000, 1, 1, 0, 0, 0).unwrap();
        let end = Utc.with_ymd_and_hms(2000 + years, 1, 1, 0, 0, 0).unwrap();
        let mut recs = Vec::new();
        let mut i = 0;
        while t < end {
            recs.push(WindRecord::new(t, speed(i), Some(Angle::new(0.01 * i as f64 - 3.0).unwrap()), 0.1));
            t += Duration::hours(6);
            i += 1;
        }
        WindSeries::new("x", recs).unwrap()
    }

    #[test]
    fn plan_blocks() {
        let s = series(10, |_| 5.0);
        let jja = filter_season(&s, Season::Jja);
        let plan = make_block_plan(&jja, DEFAULT_REPLICATES, 1).unwrap();
        assert_eq!(plan.blocks.len(), 10);
        assert_eq!(plan.replicates, 500);
        assert_eq!(plan.blocks.last().unwrap().end, jja.series.len());
        assert!(plan.blocks.windows(2).all(|w| w[0].end == w[1].start));
        let djf = filter_season(&s, Season::Djf);
        assert_eq!(make_block_plan(&djf, 10, 1).unwrap().blocks.len(), 9);
        assert_eq!(plan.draw(3), plan.draw(3));
        assert_ne!(plan.draw(3), plan.draw(4));
        let one = filter_season(&series(1, |_| 5.0), Season::Jja);
        assert!(matches!(make_block_plan(&one, 10, 1), Err(BootstrapError::InsufficientSeasons { found: 1, .. })));
    }

    #[test]
    fn constant_series_has_zero_width() {
        let s = filter_season(&series(4, |_| 6.0), Season::Son);
        let plan = make_block_plan(&s, 50, 9).unwrap();
        for est in [Estimator::Mean, Estimator::Sd, Estimator::Q95] {
            let band = bootstrap_statistic(&plan, &s, &est, 0.05).unwrap();
            assert_eq!(band.lower, band.upper);
            assert!(band.grid_deg.is_none());
        }
    }

    #[test]
    fn band_json_shape() {
        let s = filter_season(&series(4, |i| 4.0 + (i % 9) as f64), Season::Son);
        let plan = make_block_plan(&s, 40, 2).unwrap();
        let band = bootstrap_statistic(&plan, &s, &Estimator::Mean, 0.05).unwrap();
        let v = band.to_json();
        assert_eq!(v["B"], 40);
        assert!(v["lower"].is_number() && v.get("grid_deg").is_none() && v.get("tau").is_none());
        let narrower = band.at_alpha(0.2).unwrap();
        assert!(narrower.lower[0] >= band.lower[0] && narrower.upper[0] <= band.upper[0]);
        assert!(band.at_alpha(1.5).is_err());
    }

    #[test]
    fn failing_estimator_is_reported() {
        // too few directional points for a quantile curve in any replicate
        let s = filter_season(&series(3, |_| 0.05), Season::Son);
        let plan = make_block_plan(&s, 20, 2).unwrap();
        let est = Estimator::QrQuantile { tau: 0.5, basis: PeriodicSplineBasis::default() };
        assert!(matches!(bootstrap_statistic(&plan, &s, &est, 0.05), Err(BootstrapError::PointEstimate(_))));
    }
}
