//! Two-stage Weibull distributional regression on direction.
//!
//! Stage one bins observations into equal-width direction sectors and fits
//! a two-parameter Weibull to each sector's speeds by maximum likelihood.
//! Stage two smooths the per-bin scale and shape estimates across direction
//! with harmonic regressions weighted by `1 / se^2`, which makes both
//! parameter curves exactly `2 pi`-periodic. Quantiles then follow from the
//! Weibull inverse CDF `Q(tau | x) = lambda(x) (-ln(1 - tau))^{1 / kappa(x)}`.

use crate::circular::{met_grid, resultant, Angle, HarmonicBasis};
use crate::ingest::{Observation, CALM_THRESHOLD};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeibullError {
    #[error("Weibull fit needs at least 5 positive speeds, got {0}")]
    TooFewSpeeds(usize),
    #[error("speeds must be finite and strictly positive (found {0})")]
    NonPositiveSpeed(f64),
    #[error("all speeds identical ({0}); shape is unbounded")]
    DegenerateSample(f64),
    #[error("shape root-finding did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error("need at least 4 direction bins, got {0}")]
    TooFewBins(usize),
    #[error("{retained} retained bins cannot identify {needed} harmonic coefficients")]
    InsufficientBins { retained: usize, needed: usize },
    #[error("harmonic design is rank deficient; unidentifiable terms: {0}")]
    Unidentifiable(String),
    #[error("fitted {param}({angle_deg:.1} deg) = {value} is not positive")]
    NonPositiveParameter { param: &'static str, angle_deg: f64, value: f64 },
    #[error("quantile level {0} outside (0, 1)")]
    InvalidTau(f64),
    #[error("coefficient vectors have length {got}, basis needs {expected}")]
    CoefficientLength { expected: usize, got: usize },
}

/// Weibull maximum likelihood estimates with observed-information
/// standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullFit {
    pub lambda: f64,
    pub kappa: f64,
    pub se_lambda: f64,
    pub se_kappa: f64,
    pub n: usize,
}

const MLE_MAX_ITER: usize = 200;

/// Maximum likelihood Weibull fit.
///
/// The shape solves the profile score
/// `sum x^k ln x / sum x^k - 1/k - mean(ln x) = 0`, which is strictly
/// increasing in `k`; the scale is then `(mean x^k)^{1/k}`. Work is done on
/// `ln(x / g)` with `g` the geometric mean, so the computation does not
/// depend on the units of `x`.
pub fn weibull_mle(speeds: &[f64]) -> Result<WeibullFit, WeibullError> {
    let n = speeds.len();
    if n < 5 {
        return Err(WeibullError::TooFewSpeeds(n));
    }
    if let Some(&bad) = speeds.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(WeibullError::NonPositiveSpeed(bad));
    }
    let logs: Vec<f64> = speeds.iter().map(|s| s.ln()).collect();
    let log_g = logs.iter().sum::<f64>() / n as f64;
    let ly: Vec<f64> = logs.iter().map(|l| l - log_g).collect();
    let ly_max = ly.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ly_min = ly.iter().cloned().fold(f64::INFINITY, f64::min);
    if ly_max - ly_min <= 1e-14 {
        return Err(WeibullError::DegenerateSample(speeds[0]));
    }
    let mean_ly = ly.iter().sum::<f64>() / n as f64;

    // score and its derivative at shape k
    let score = |k: f64| -> (f64, f64) {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &l in &ly {
            let w = (k * (l - ly_max)).exp();
            s0 += w;
            s1 += w * l;
            s2 += w * l * l;
        }
        let m1 = s1 / s0;
        let var = s2 / s0 - m1 * m1;
        (m1 - 1.0 / k - mean_ly, var.max(0.0) + 1.0 / (k * k))
    };

    let sd_ly = (ly.iter().map(|l| (l - mean_ly).powi(2)).sum::<f64>() / n as f64).sqrt();
    let mut k = (PI / (6f64.sqrt() * sd_ly)).clamp(1e-3, 1e3);
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    let mut converged = false;
    for _ in 0..MLE_MAX_ITER {
        let (g, dg) = score(k);
        if g > 0.0 {
            hi = k;
        } else {
            lo = k;
        }
        let mut next = k - g / dg;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * k };
        }
        let step = (next - k).abs();
        k = next;
        if step <= 1e-13 * k {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(WeibullError::NonConvergence(MLE_MAX_ITER));
    }

    let s0: f64 = ly.iter().map(|&l| (k * (l - ly_max)).exp()).sum();
    let log_lambda = log_g + ly_max + (s0 / n as f64).ln() / k;
    let lambda = log_lambda.exp();

    // observed information
    let nf = n as f64;
    let (mut sz, mut szl, mut szl2) = (0.0, 0.0, 0.0);
    for &lx in &logs {
        let l = lx - log_lambda;
        let z = (k * l).exp();
        sz += z;
        szl += z * l;
        szl2 += z * l * l;
    }
    let j_ll = -(nf * k - k * (k + 1.0) * sz) / (lambda * lambda);
    let j_kk = nf / (k * k) + szl2;
    let j_lk = -(-nf + sz + k * szl) / lambda;
    let det = j_ll * j_kk - j_lk * j_lk;
    let se_lambda = (j_kk / det).sqrt();
    let se_kappa = (j_ll / det).sqrt();
    Ok(WeibullFit { lambda, kappa: k, se_lambda, se_kappa, n })
}

/// Settings for [`bin_directional`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinningConfig {
    pub n_bins: usize,
    /// Bins with fewer observations are excluded.
    pub min_count: usize,
    pub calm_threshold: f64,
}

impl Default for BinningConfig {
    fn default() -> Self {
        BinningConfig { n_bins: 16, min_count: 30, calm_threshold: CALM_THRESHOLD }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum BinStatus {
    Retained,
    TooFew,
    FitFailed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeibullBin {
    pub lower: f64,
    pub upper: f64,
    /// Circular mean of the member directions.
    pub center: Option<Angle>,
    pub count: usize,
    pub fit: Option<WeibullFit>,
    pub status: BinStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedWeibullFit {
    pub bins: Vec<WeibullBin>,
    /// Observations dropped as calm or missing a direction.
    pub calm_count: usize,
}

impl BinnedWeibullFit {
    pub fn retained(&self) -> impl Iterator<Item = (&WeibullBin, Angle, &WeibullFit)> {
        self.bins.iter().filter_map(|b| match (&b.status, b.center, &b.fit) {
            (BinStatus::Retained, Some(c), Some(f)) => Some((b, c, f)),
            _ => None,
        })
    }

    pub fn retained_count(&self) -> usize {
        self.retained().count()
    }

    pub fn edges(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.bins.iter().map(|b| b.lower).collect();
        if let Some(last) = self.bins.last() {
            e.push(last.upper);
        }
        e
    }
}

/// Index of the equal-width bin holding `x`; bin 0 starts at `-pi`.
pub fn bin_index(x: Angle, n_bins: usize) -> usize {
    let j = ((x.radians() + PI) / (TAU / n_bins as f64)).floor() as usize;
    j.min(n_bins - 1)
}

/// Per-bin Weibull fits over `n_bins` equal sectors of `[-pi, pi)`.
///
/// Sparse bins and bins whose fit fails are kept in the output with a
/// status explaining the exclusion.
pub fn bin_directional(
    obs: &[Observation],
    config: &BinningConfig,
) -> Result<BinnedWeibullFit, WeibullError> {
    let nb = config.n_bins;
    if nb < 4 {
        return Err(WeibullError::TooFewBins(nb));
    }
    let mut dirs: Vec<Vec<Angle>> = vec![Vec::new(); nb];
    let mut speeds: Vec<Vec<f64>> = vec![Vec::new(); nb];
    let mut calm = 0;
    for o in obs {
        match o.direction {
            Some(d) if o.speed >= config.calm_threshold => {
                let j = bin_index(d, nb);
                dirs[j].push(d);
                speeds[j].push(o.speed);
            }
            _ => calm += 1,
        }
    }
    let width = TAU / nb as f64;
    let bins = (0..nb)
        .map(|j| {
            let lower = -PI + width * j as f64;
            let upper = lower + width;
            let count = speeds[j].len();
            let center = resultant(&dirs[j], None).ok().map(|r| r.mean);
            let (fit, status) = if count < config.min_count {
                (None, BinStatus::TooFew)
            } else {
                match weibull_mle(&speeds[j]) {
                    Ok(f) if f.se_lambda.is_finite() && f.se_kappa.is_finite() => {
                        (Some(f), BinStatus::Retained)
                    }
                    Ok(_) => (None, BinStatus::FitFailed("non-finite standard error".into())),
                    Err(e) => (None, BinStatus::FitFailed(e.to_string())),
                }
            };
            WeibullBin { lower, upper, center, count, fit, status }
        })
        .collect();
    Ok(BinnedWeibullFit { bins, calm_count: calm })
}

/// Harmonic curves for the Weibull scale and shape.
#[derive(Debug, Clone, PartialEq)]
pub struct WeibullDirectionalModel {
    basis: HarmonicBasis,
    lambda_coef: Vec<f64>,
    kappa_coef: Vec<f64>,
    floor: f64,
    bins: Option<BinnedWeibullFit>,
}

/// Grid used to validate positivity after fitting.
pub const VALIDATION_GRID: usize = 720;

impl WeibullDirectionalModel {
    /// Builds a model from coefficients laid out as the rows of `basis`.
    pub fn from_coefficients(
        basis: HarmonicBasis,
        lambda_coef: Vec<f64>,
        kappa_coef: Vec<f64>,
    ) -> Result<Self, WeibullError> {
        for c in [&lambda_coef, &kappa_coef] {
            if c.len() != basis.len() {
                return Err(WeibullError::CoefficientLength { expected: basis.len(), got: c.len() });
            }
        }
        Ok(WeibullDirectionalModel { basis, lambda_coef, kappa_coef, floor: 0.0, bins: None })
    }

    pub fn basis(&self) -> HarmonicBasis {
        self.basis
    }

    pub fn lambda_coefficients(&self) -> &[f64] {
        &self.lambda_coef
    }

    pub fn kappa_coefficients(&self) -> &[f64] {
        &self.kappa_coef
    }

    pub fn bins(&self) -> Option<&BinnedWeibullFit> {
        self.bins.as_ref()
    }

    fn eval(&self, coef: &[f64], x: Angle) -> f64 {
        self.basis.eval(x).iter().zip(coef).map(|(r, c)| r * c).sum()
    }

    pub fn lambda(&self, x: Angle) -> f64 {
        self.eval(&self.lambda_coef, x)
    }

    pub fn kappa(&self, x: Angle) -> f64 {
        self.eval(&self.kappa_coef, x)
    }

    /// `lambda(x) (-ln(1 - tau))^{1/kappa(x)}`.
    pub fn quantile(&self, x: Angle, tau: f64) -> Result<f64, WeibullError> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(WeibullError::InvalidTau(tau));
        }
        let l = self.lambda(x);
        let k = self.kappa(x);
        for (param, value) in [("lambda", l), ("kappa", k)] {
            if !(value > self.floor) {
                return Err(WeibullError::NonPositiveParameter {
                    param,
                    angle_deg: x.to_met_deg(),
                    value,
                });
            }
        }
        Ok(l * (-(1.0 - tau).ln()).powf(1.0 / k))
    }

    /// Checks `lambda(x) > floor` and `kappa(x) > floor` on a dense grid.
    pub fn validate(&self) -> Result<(), WeibullError> {
        for x in crate::circular::angle_grid(VALIDATION_GRID) {
            for (param, value) in [("lambda", self.lambda(x)), ("kappa", self.kappa(x))] {
                if !(value > self.floor) {
                    return Err(WeibullError::NonPositiveParameter {
                        param,
                        angle_deg: x.to_met_deg(),
                        value,
                    });
                }
            }
        }
        Ok(())
    }

    /// JSON image of the model and the bins it was fit to.
    pub fn to_json(&self) -> WeibullModelJson {
        let split = |c: &[f64]| {
            let off = usize::from(self.basis.include_intercept);
            let intercept = if off == 1 { c[0] } else { 0.0 };
            let alpha = c[off..].iter().step_by(2).cloned().collect();
            let beta = c[off + 1..].iter().step_by(2).cloned().collect();
            (intercept, alpha, beta)
        };
        let (il, al, bl) = split(&self.lambda_coef);
        let (ik, ak, bk) = split(&self.kappa_coef);
        let bins = self.bins.as_ref().map(|b| {
            let fit = |f: fn(&WeibullFit) -> f64| -> Vec<Option<f64>> {
                b.bins.iter().map(|bin| match bin.status {
                    BinStatus::Retained => bin.fit.as_ref().map(f),
                    _ => None,
                }).collect()
            };
            BinsJson {
                edges: b.edges().iter().map(|e| Angle::new(*e).unwrap().to_met_deg()).collect(),
                centers: b.bins.iter().map(|bin| bin.center.map(|c| c.to_met_deg())).collect(),
                lambda: fit(|f| f.lambda),
                kappa: fit(|f| f.kappa),
                se: SeJson { lambda: fit(|f| f.se_lambda), kappa: fit(|f| f.se_kappa) },
                n: b.bins.iter().map(|bin| bin.count).collect(),
                retained: b.bins.iter().map(|bin| bin.status == BinStatus::Retained).collect(),
                calm: b.calm_count,
            }
        });
        WeibullModelJson {
            k: self.basis.num_harmonics,
            intercepts: Intercepts { lambda: il, kappa: ik },
            alpha_lambda: al,
            beta_lambda: bl,
            alpha_kappa: ak,
            beta_kappa: bk,
            bins,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Intercepts {
    pub lambda: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeJson {
    pub lambda: Vec<Option<f64>>,
    pub kappa: Vec<Option<f64>>,
}

/// Bin summaries; angles are meteorological bearings in degrees.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinsJson {
    pub edges: Vec<f64>,
    pub centers: Vec<Option<f64>>,
    pub lambda: Vec<Option<f64>>,
    pub kappa: Vec<Option<f64>>,
    pub se: SeJson,
    pub n: Vec<usize>,
    pub retained: Vec<bool>,
    pub calm: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeibullModelJson {
    #[serde(rename = "K")]
    pub k: usize,
    pub intercepts: Intercepts,
    pub alpha_lambda: Vec<f64>,
    pub beta_lambda: Vec<f64>,
    pub alpha_kappa: Vec<f64>,
    pub beta_kappa: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<BinsJson>,
}

/// Weighted least squares harmonic fits of the binned scale and shape.
///
/// Both regressions include an intercept. Each bin is weighted by the
/// reciprocal squared standard error of the parameter being fit.
pub fn fit_weibull_harmonic(
    binned: &BinnedWeibullFit,
    num_harmonics: usize,
) -> Result<WeibullDirectionalModel, WeibullError> {
    let basis = HarmonicBasis::new(num_harmonics, true);
    let p = basis.len();
    let retained: Vec<_> = binned.retained().collect();
    if retained.len() < p {
        return Err(WeibullError::InsufficientBins { retained: retained.len(), needed: p });
    }
    let rows: Vec<Vec<f64>> = retained.iter().map(|(_, c, _)| basis.eval(*c)).collect();
    let lam: Vec<f64> = retained.iter().map(|(_, _, f)| f.lambda).collect();
    let lam_w: Vec<f64> = retained.iter().map(|(_, _, f)| 1.0 / (f.se_lambda * f.se_lambda)).collect();
    let kap: Vec<f64> = retained.iter().map(|(_, _, f)| f.kappa).collect();
    let kap_w: Vec<f64> = retained.iter().map(|(_, _, f)| 1.0 / (f.se_kappa * f.se_kappa)).collect();
    let lambda_coef = weighted_least_squares(&rows, &lam, &lam_w, &basis)?;
    let kappa_coef = weighted_least_squares(&rows, &kap, &kap_w, &basis)?;
    let model = WeibullDirectionalModel {
        basis,
        lambda_coef,
        kappa_coef,
        floor: 0.0,
        bins: Some(binned.clone()),
    };
    model.validate()?;
    Ok(model)
}

/// Minimises `sum w_i (y_i - row_i' b)^2` through the SVD of the
/// row-scaled design.
pub fn weighted_least_squares(
    rows: &[Vec<f64>],
    y: &[f64],
    w: &[f64],
    basis: &HarmonicBasis,
) -> Result<Vec<f64>, WeibullError> {
    let n = rows.len();
    let p = rows[0].len();
    let a = DMatrix::from_fn(n, p, |i, j| w[i].sqrt() * rows[i][j]);
    let b = DVector::from_fn(n, |i, _| w[i].sqrt() * y[i]);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-10;
    let v_t = svd.v_t.as_ref().expect("requested V");
    let mut bad = Vec::new();
    for (idx, &sv) in svd.singular_values.iter().enumerate() {
        if sv <= tol {
            for j in 0..p {
                if v_t[(idx, j)].abs() > 0.1 {
                    bad.push(basis.column_name(j));
                }
            }
        }
    }
    if !bad.is_empty() {
        bad.sort();
        bad.dedup();
        return Err(WeibullError::Unidentifiable(bad.join(", ")));
    }
    let sol = svd.solve(&b, tol).expect("U and V were computed");
    Ok(sol.iter().cloned().collect())
}

/// `weibull_directional_quantile` in function form.
pub fn weibull_directional_quantile(
    model: &WeibullDirectionalModel,
    x: Angle,
    tau: f64,
) -> Result<f64, WeibullError> {
    model.quantile(x, tau)
}

/// Rows of `(bearing_deg, Q(tau_1), ..., Q(tau_m))` at integer bearings.
pub fn quantile_table(
    model: &WeibullDirectionalModel,
    taus: &[f64],
) -> Result<Vec<(f64, Vec<f64>)>, WeibullError> {
    met_grid(360)
        .into_iter()
        .map(|(d, x)| {
            let qs = taus.iter().map(|&t| model.quantile(x, t)).collect::<Result<Vec<_>, _>>()?;
            Ok((d, qs))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use testkit::sample;

    fn obs(speed: f64, dir: f64) -> Observation {
        Observation::new(speed, Some(Angle::new(dir).unwrap()))
    }

    #[test]
    fn mle_errors() {
        assert_eq!(weibull_mle(&[1.0, 2.0, 3.0]), Err(WeibullError::TooFewSpeeds(3)));
        assert!(matches!(weibull_mle(&[1.0; 10]), Err(WeibullError::DegenerateSample(_))));
        assert!(matches!(
            weibull_mle(&[1.0, 2.0, 0.0, 3.0, 4.0]),
            Err(WeibullError::NonPositiveSpeed(_))
        ));
    }

    #[test]
    fn mle_scale_equivariance() {
        let mut rng = testkit::rng(11);
        let xs: Vec<f64> = (0..2000).map(|_| sample::weibull(&mut rng, 6.0, 1.8)).collect();
        let base = weibull_mle(&xs).unwrap();
        for c in [2.0, 0.5, 1.7, 13.3] {
            let scaled: Vec<f64> = xs.iter().map(|x| c * x).collect();
            let f = weibull_mle(&scaled).unwrap();
            assert_relative_eq!(f.lambda, c * base.lambda, max_relative = 1e-12);
            assert_relative_eq!(f.kappa, base.kappa, max_relative = 1e-12);
            assert_relative_eq!(f.se_lambda, c * base.se_lambda, max_relative = 1e-9);
        }
    }

    #[test]
    fn mle_standard_errors_match_asymptotic_formula() {
        // at the MLE: var(lambda) = lambda^2 (1 + ((1 - gamma)^2 ... ) known closed
        // form is messy; compare against numerically differentiated log-likelihood
        let mut rng = testkit::rng(12);
        let xs: Vec<f64> = (0..5000).map(|_| sample::weibull(&mut rng, 8.0, 2.2)).collect();
        let f = weibull_mle(&xs).unwrap();
        let ll = |l: f64, k: f64| -> f64 {
            xs.iter()
                .map(|x| k.ln() - k * l.ln() + (k - 1.0) * x.ln() - (x / l).powf(k))
                .sum()
        };
        let (hl, hk) = (1e-4 * f.lambda, 1e-4 * f.kappa);
        let (l, k) = (f.lambda, f.kappa);
        let d_ll = (ll(l + hl, k) - 2.0 * ll(l, k) + ll(l - hl, k)) / (hl * hl);
        let d_kk = (ll(l, k + hk) - 2.0 * ll(l, k) + ll(l, k - hk)) / (hk * hk);
        let d_lk = (ll(l + hl, k + hk) - ll(l + hl, k - hk) - ll(l - hl, k + hk)
            + ll(l - hl, k - hk))
            / (4.0 * hl * hk);
        let det = d_ll * d_kk - d_lk * d_lk;
        assert_relative_eq!(f.se_lambda, (-d_kk / det).sqrt(), max_relative = 1e-3);
        assert_relative_eq!(f.se_kappa, (-d_ll / det).sqrt(), max_relative = 1e-3);
    }

    #[test]
    fn binning_edge_cases() {
        let v: Vec<Observation> = (0..200).map(|i| obs(1.0 + (i % 17) as f64 * 0.3, 0.1)).collect();
        let b = bin_directional(&v, &BinningConfig { n_bins: 8, ..Default::default() }).unwrap();
        assert_eq!(b.retained_count(), 1);
        assert_eq!(b.bins.iter().filter(|x| x.status == BinStatus::TooFew).count(), 7);
        assert!(bin_directional(&v, &BinningConfig { n_bins: 3, ..Default::default() }).is_err());

        let mut with_calm = v.clone();
        with_calm.push(Observation::new(0.05, None));
        with_calm.push(Observation::new(0.05, Some(Angle::new(1.0).unwrap())));
        let b = bin_directional(&with_calm, &BinningConfig::default()).unwrap();
        assert_eq!(b.calm_count, 2);
    }

    #[test]
    fn harmonic_fit_constant_response() {
        let fit = WeibullFit { lambda: 7.5, kappa: 2.1, se_lambda: 0.2, se_kappa: 0.05, n: 100 };
        let bins = synthetic_bins(16, |_| fit);
        let m = fit_weibull_harmonic(&bins, 2).unwrap();
        assert!((m.lambda_coefficients()[0] - 7.5).abs() < 1e-10);
        assert!((m.kappa_coefficients()[0] - 2.1).abs() < 1e-10);
        for c in &m.lambda_coefficients()[1..] {
            assert!(c.abs() < 1e-10);
        }
    }

    #[test]
    fn harmonic_fit_recovers_in_span_curve() {
        let bins = synthetic_bins(16, |x| WeibullFit {
            lambda: 8.0 + 2.0 * x.cos(),
            kappa: 2.0,
            se_lambda: 0.1,
            se_kappa: 0.1,
            n: 100,
        });
        let m = fit_weibull_harmonic(&bins, 1).unwrap();
        let expect = [8.0, 2.0, 0.0];
        for (c, e) in m.lambda_coefficients().iter().zip(expect) {
            assert!((c - e).abs() < 1e-8);
        }
        assert!((m.kappa_coefficients()[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn harmonic_fit_matches_gls_oracle() {
        let mut bins = synthetic_bins(12, |x| WeibullFit {
            lambda: 8.0 + 2.0 * x.cos() + 0.3 * (3.0 * x).sin(),
            kappa: 2.0 + 0.2 * x.sin(),
            se_lambda: 0.1,
            se_kappa: 0.1,
            n: 100,
        });
        let before = fit_weibull_harmonic(&bins, 1).unwrap();
        bins.bins[3].fit.as_mut().unwrap().se_lambda = 0.2;
        let after = fit_weibull_harmonic(&bins, 1).unwrap();
        let basis = HarmonicBasis::new(1, true);
        let rows: Vec<Vec<f64>> = bins.retained().map(|(_, c, _)| basis.eval(c)).collect();
        let y: Vec<f64> = bins.retained().map(|(_, _, f)| f.lambda).collect();
        let w: Vec<f64> = bins.retained().map(|(_, _, f)| 1.0 / f.se_lambda.powi(2)).collect();
        let oracle = testkit::arith::gls(&rows, &w, &y);
        for (a, b) in after.lambda_coefficients().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        // the down-weighted bin pulls the fit less
        let c3 = bins.bins[3].center.unwrap();
        let y3 = bins.bins[3].fit.unwrap().lambda;
        assert!((after.lambda(c3) - y3).abs() > (before.lambda(c3) - y3).abs());
    }

    #[test]
    fn harmonic_fit_guards() {
        let fit = WeibullFit { lambda: 7.5, kappa: 2.1, se_lambda: 0.2, se_kappa: 0.05, n: 100 };
        let bins = synthetic_bins(4, |_| fit);
        assert!(matches!(
            fit_weibull_harmonic(&bins, 2),
            Err(WeibullError::InsufficientBins { retained: 4, needed: 5 })
        ));
        // sin(3x) vanishes at every multiple of 60 degrees
        let basis = HarmonicBasis::new(3, true);
        let rows: Vec<Vec<f64>> = (0..7).map(|k| basis.eval_radians((k % 6) as f64 * PI / 3.0)).collect();
        match weighted_least_squares(&rows, &[1.0; 7], &[1.0; 7], &basis) {
            Err(WeibullError::Unidentifiable(names)) => assert_eq!(names, "sin(3x)"),
            other => panic!("{other:?}"),
        }
        // shape curve dipping below zero
        let bins = synthetic_bins(16, |x| WeibullFit {
            lambda: 8.0,
            kappa: 0.5 + 1.0 * x.cos(),
            se_lambda: 0.1,
            se_kappa: 0.1,
            n: 100,
        });
        assert!(matches!(
            fit_weibull_harmonic(&bins, 1),
            Err(WeibullError::NonPositiveParameter { param: "kappa", .. })
        ));
    }

    #[test]
    fn quantile_examples() {
        let basis = HarmonicBasis::new(1, true);
        let m = WeibullDirectionalModel::from_coefficients(basis, vec![9.0, 1.0, 0.5], vec![1.0, 0.0, 0.0])
            .unwrap();
        for x in crate::circular::angle_grid(73) {
            assert_eq!(m.quantile(x, 0.5).unwrap(), m.lambda(x) * 2f64.ln());
            let at_scale = m.quantile(x, 1.0 - (-1f64).exp()).unwrap();
            assert_relative_eq!(at_scale, m.lambda(x), max_relative = 1e-14);
            let q = [0.5, 0.75, 0.95].map(|t| m.quantile(x, t).unwrap());
            assert!(q[0] < q[1] && q[1] < q[2]);
        }
        assert!(m.quantile(Angle::new(0.0).unwrap(), 1.2).is_err());
        let bad = WeibullDirectionalModel::from_coefficients(basis, vec![1.0, 3.0, 0.0], vec![1.0, 0.0, 0.0])
            .unwrap();
        assert!(bad.quantile(Angle::new(PI).unwrap(), 0.5).is_err());
        assert!(bad.validate().is_err());
        assert!(WeibullDirectionalModel::from_coefficients(basis, vec![1.0], vec![1.0]).is_err());
    }

    #[test]
    fn model_json_shape() {
        let fit = WeibullFit { lambda: 7.5, kappa: 2.1, se_lambda: 0.2, se_kappa: 0.05, n: 100 };
        let mut bins = synthetic_bins(16, |_| fit);
        bins.bins[0].status = BinStatus::TooFew;
        let m = fit_weibull_harmonic(&bins, 3).unwrap();
        let v = serde_json::to_value(m.to_json()).unwrap();
        assert_eq!(v["K"], 3);
        assert_eq!(v["alpha_lambda"].as_array().unwrap().len(), 3);
        assert_eq!(v["bins"]["edges"].as_array().unwrap().len(), 17);
        assert!(v["bins"]["lambda"][0].is_null());
        assert_eq!(v["bins"]["n"][1], 100);
        assert!(v["intercepts"]["lambda"].as_f64().unwrap() > 7.0);
    }

    fn synthetic_bins(nb: usize, f: impl Fn(f64) -> WeibullFit) -> BinnedWeibullFit {
        let width = TAU / nb as f64;
        let bins = (0..nb)
            .map(|j| {
                let lower = -PI + width * j as f64;
                let c = lower + 0.5 * width;
                WeibullBin {
                    lower,
                    upper: lower + width,
                    center: Some(Angle::new(c).unwrap()),
                    count: 100,
                    fit: Some(f(c)),
                    status: BinStatus::Retained,
                }
            })
            .collect();
        BinnedWeibullFit { bins, calm_count: 0 }
    }
}
