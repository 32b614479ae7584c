//! von Mises densities and mixture fitting for wind directions.
//!
//! A component with location `mu` and concentration `kappa` has density
//! `exp(kappa cos(x - mu)) / (2 pi I0(kappa))`. Mixtures are fit by EM with
//! a deterministic sector initialisation plus seeded random restarts; the
//! restart with the highest log-likelihood wins.
//!
//! Every density is evaluated in the log domain through the scaled Bessel
//! function, so concentrations far beyond `e^kappa` overflow stay finite.

pub mod bessel;

use crate::circular::{resultant, Angle, CircularError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

/// Concentrations are capped here.
pub const KAPPA_MAX: f64 = 1e6;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VonMisesError {
    #[error("concentration must be finite and nonnegative, got {0}")]
    InvalidKappa(f64),
    #[error("Bessel argument must be finite and nonnegative, got {0}")]
    InvalidBesselArgument(f64),
    #[error("mixture weights must be positive and sum to 1 (sum = {sum})")]
    InvalidWeights { sum: f64 },
    #[error("mixture has {weights} weights but {components} components")]
    ShapeMismatch { weights: usize, components: usize },
    #[error("need at least {needed} angles, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("mean resultant length {0} is indistinguishable from 1: all angles identical")]
    DegenerateConcentration(f64),
    #[error("number of components must be at least 1")]
    NoComponents,
    #[error("{components} components requested but only {distinct} distinct angles")]
    TooFewDistinct { components: usize, distinct: usize },
    #[error("every EM run collapsed a component below weight {floor:e}: {details}")]
    ComponentCollapse { floor: f64, details: String },
    #[error(transparent)]
    Circular(#[from] CircularError),
}

/// `I_0(kappa)`. Overflows to infinity above about 713; use
/// [`log_bessel_i0`] there.
pub fn bessel_i0(kappa: f64) -> Result<f64, VonMisesError> {
    check_bessel(kappa)?;
    Ok(bessel::i0e(kappa) * kappa.exp())
}

pub fn log_bessel_i0(kappa: f64) -> Result<f64, VonMisesError> {
    check_bessel(kappa)?;
    Ok(bessel::log_i0(kappa))
}

fn check_bessel(kappa: f64) -> Result<(), VonMisesError> {
    if !kappa.is_finite() || kappa < 0.0 {
        return Err(VonMisesError::InvalidBesselArgument(kappa));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VonMisesComponent {
    pub mu: Angle,
    pub kappa: f64,
}

impl VonMisesComponent {
    pub fn new(mu: Angle, kappa: f64) -> Result<Self, VonMisesError> {
        if !kappa.is_finite() || kappa < 0.0 {
            return Err(VonMisesError::InvalidKappa(kappa));
        }
        Ok(VonMisesComponent { mu, kappa })
    }

    /// Normalising constant `ln(2 pi I0(kappa))`.
    fn log_norm(&self) -> f64 {
        LN_2PI + bessel::log_i0(self.kappa)
    }

    pub fn log_density(&self, x: Angle) -> f64 {
        self.kappa * (x.radians() - self.mu.radians()).cos() - self.log_norm()
    }

    pub fn density(&self, x: Angle) -> f64 {
        self.log_density(x).exp()
    }
}

/// Density of a single component, `exp(kappa cos(x - mu)) / (2 pi I0(kappa))`.
pub fn vm_density(c: &VonMisesComponent, x: Angle) -> f64 {
    c.density(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VonMisesMixture {
    components: Vec<VonMisesComponent>,
    weights: Vec<f64>,
}

impl VonMisesMixture {
    pub fn new(components: Vec<VonMisesComponent>, weights: Vec<f64>) -> Result<Self, VonMisesError> {
        if components.is_empty() {
            return Err(VonMisesError::NoComponents);
        }
        if components.len() != weights.len() {
            return Err(VonMisesError::ShapeMismatch {
                weights: weights.len(),
                components: components.len(),
            });
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w > 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(VonMisesError::InvalidWeights { sum });
        }
        Ok(VonMisesMixture { components, weights })
    }

    pub fn single(c: VonMisesComponent) -> Self {
        VonMisesMixture { components: vec![c], weights: vec![1.0] }
    }

    pub fn components(&self) -> &[VonMisesComponent] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn log_density(&self, x: Angle) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w.ln() + c.log_density(x))
            .collect();
        log_sum_exp(&terms)
    }

    pub fn density(&self, x: Angle) -> f64 {
        self.log_density(x).exp()
    }

    pub fn log_likelihood(&self, angles: &[Angle]) -> f64 {
        angles.iter().map(|&a| self.log_density(a)).sum()
    }
}

/// Weighted sum of component densities.
pub fn mixture_density(g: &VonMisesMixture, x: Angle) -> f64 {
    g.density(x)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Solves `I1(kappa)/I0(kappa) = r` for `kappa` by safeguarded Newton.
///
/// `r` at or above `A(KAPPA_MAX)` returns the cap.
pub fn invert_a1(r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    if r >= bessel::a1(KAPPA_MAX) {
        return KAPPA_MAX;
    }
    let (mut lo, mut hi) = (0.0, KAPPA_MAX);
    // Best and Fisher's approximation as a starting point
    let mut k = if r < 0.53 {
        2.0 * r + r.powi(3) + 5.0 * r.powi(5) / 6.0
    } else if r < 0.85 {
        -0.4 + 1.39 * r + 0.43 / (1.0 - r)
    } else {
        1.0 / (r.powi(3) - 4.0 * r * r + 3.0 * r)
    };
    k = k.clamp(1e-12, KAPPA_MAX);
    for _ in 0..200 {
        let a = bessel::a1(k);
        let f = a - r;
        if f.abs() < 1e-15 {
            break;
        }
        if f > 0.0 {
            hi = k;
        } else {
            lo = k;
        }
        let deriv = 1.0 - a / k - a * a;
        let mut next = k - f / deriv;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - k).abs() <= 1e-14 * k.max(1.0) {
            k = next;
            break;
        }
        k = next;
    }
    k
}

/// Maximum likelihood von Mises fit: circular mean and `A^{-1}(R)`.
///
/// If the resultant vanishes exactly the likelihood is flat in `mu`; the
/// fit then returns `kappa = 0` with `mu = 0`.
pub fn fit_vm_mle(angles: &[Angle]) -> Result<VonMisesComponent, VonMisesError> {
    if angles.len() < 2 {
        return Err(VonMisesError::InsufficientData { needed: 2, got: angles.len() });
    }
    match resultant(angles, None) {
        Ok(r) => {
            if r.length >= 1.0 - 1e-12 {
                return Err(VonMisesError::DegenerateConcentration(r.length));
            }
            Ok(VonMisesComponent { mu: r.mean, kappa: invert_a1(r.length) })
        }
        Err(CircularError::DegenerateMean(_)) => {
            Ok(VonMisesComponent { mu: Angle::new(0.0)?, kappa: 0.0 })
        }
        Err(e) => Err(e.into()),
    }
}

/// Settings for [`fit_vm_mixture_em`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iter: usize,
    /// Stop once the log-likelihood gain drops below this.
    pub tol: f64,
    /// Random restarts on top of the sector initialisation.
    pub restarts: usize,
    pub seed: u64,
    pub weight_floor: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig { max_iter: 500, tol: 1e-8, restarts: 10, seed: 0, weight_floor: 1e-6 }
    }
}

impl EmConfig {
    pub fn with_seed(seed: u64) -> Self {
        EmConfig { seed, ..Default::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmResult {
    pub mixture: VonMisesMixture,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub per_iteration_loglik: Vec<f64>,
    /// Which initialisation won: 0 is the sector start, `r >= 1` a restart.
    pub best_run: usize,
    /// Runs discarded because a component collapsed.
    pub collapsed_runs: usize,
    /// Log-likelihood trace of every run in run order, collapsed runs up to
    /// the iteration where they stopped.
    pub run_traces: Vec<Vec<f64>>,
}

/// The JSON shape written for a fitted mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSummary {
    pub weights: Vec<f64>,
    /// Locations as meteorological bearings.
    pub mu_deg: Vec<f64>,
    pub kappa: Vec<f64>,
    pub loglik: f64,
    pub n: usize,
    pub converged: bool,
}

impl MixtureSummary {
    pub fn new(result: &EmResult, n: usize) -> Self {
        let m = &result.mixture;
        MixtureSummary {
            weights: m.weights.clone(),
            mu_deg: m.components.iter().map(|c| c.mu.to_met_deg()).collect(),
            kappa: m.components.iter().map(|c| c.kappa).collect(),
            loglik: result.log_likelihood,
            n,
            converged: result.converged,
        }
    }

    pub fn to_mixture(&self) -> Result<VonMisesMixture, VonMisesError> {
        let comps = self
            .mu_deg
            .iter()
            .zip(&self.kappa)
            .map(|(&d, &k)| VonMisesComponent::new(Angle::from_met_deg(d)?, k))
            .collect::<Result<Vec<_>, _>>()?;
        // weights may have been rounded on output
        let sum: f64 = self.weights.iter().sum();
        VonMisesMixture::new(comps, self.weights.iter().map(|w| w / sum).collect())
    }
}

struct Trig {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

enum RunOutcome {
    Done { mixture: VonMisesMixture, trace: Vec<f64>, converged: bool },
    Collapsed { component: usize, weight: f64, iteration: usize, trace: Vec<f64> },
}

/// Fits an `m`-component von Mises mixture by EM.
///
/// Run 0 starts from `m` contiguous angular sectors holding equal numbers
/// of points, cut starting at the widest gap in the sample so the split
/// does not depend on where `-pi` falls. Runs `1..=restarts` start from
/// soft assignments around randomly chosen data points, each drawn from
/// its own stream of the seeded generator. Runs that push a weight below
/// `weight_floor` are discarded.
pub fn fit_vm_mixture_em(
    angles: &[Angle],
    m: usize,
    config: &EmConfig,
) -> Result<EmResult, VonMisesError> {
    if m == 0 {
        return Err(VonMisesError::NoComponents);
    }
    let n = angles.len();
    if n < 10 * m {
        return Err(VonMisesError::InsufficientData { needed: 10 * m, got: n });
    }
    let mut sorted: Vec<f64> = angles.iter().map(|a| a.radians()).collect();
    sorted.sort_by(f64::total_cmp);
    let distinct = 1 + sorted.windows(2).filter(|w| w[1] > w[0]).count();
    if distinct < m {
        return Err(VonMisesError::TooFewDistinct { components: m, distinct });
    }

    if m == 1 {
        let c = fit_vm_mle(angles)?;
        let mixture = VonMisesMixture::single(c);
        let ll = mixture.log_likelihood(angles);
        return Ok(EmResult {
            mixture,
            log_likelihood: ll,
            iterations: 1,
            converged: true,
            per_iteration_loglik: vec![ll],
            best_run: 0,
            collapsed_runs: 0,
            run_traces: vec![vec![ll]],
        });
    }

    let trig = Trig {
        cos: angles.iter().map(|a| a.radians().cos()).collect(),
        sin: angles.iter().map(|a| a.radians().sin()).collect(),
    };

    let runs: Vec<RunOutcome> = (0..=config.restarts)
        .into_par_iter()
        .map(|run| {
            let resp = if run == 0 {
                sector_responsibilities(angles, m)
            } else {
                random_responsibilities(angles, m, config.seed, run as u64)
            };
            run_em(&trig, resp, m, config)
        })
        .collect();

    let mut best: Option<(usize, VonMisesMixture, Vec<f64>, bool)> = None;
    let mut collapsed = Vec::new();
    let mut run_traces = Vec::with_capacity(runs.len());
    for (run, outcome) in runs.into_iter().enumerate() {
        match outcome {
            RunOutcome::Done { mixture, trace, converged } => {
                run_traces.push(trace.clone());
                let ll = *trace.last().expect("at least one E-step");
                let better = match &best {
                    None => true,
                    Some((_, _, t, _)) => ll > *t.last().unwrap(),
                };
                if better {
                    best = Some((run, mixture, trace, converged));
                }
            }
            RunOutcome::Collapsed { component, weight, iteration, trace } => {
                run_traces.push(trace);
                collapsed.push(format!(
                    "run {run}: component {component} weight {weight:.3e} at iteration {iteration}"
                ));
            }
        }
    }
    match best {
        Some((run, mixture, trace, converged)) => Ok(EmResult {
            mixture,
            log_likelihood: *trace.last().unwrap(),
            iterations: trace.len(),
            converged,
            per_iteration_loglik: trace,
            best_run: run,
            collapsed_runs: collapsed.len(),
            run_traces,
        }),
        None => Err(VonMisesError::ComponentCollapse {
            floor: config.weight_floor,
            details: collapsed.join("; "),
        }),
    }
}

// responsibilities are stored row-major: resp[i * m + k]
fn sector_responsibilities(angles: &[Angle], m: usize) -> Vec<f64> {
    let n = angles.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| angles[a].radians().total_cmp(&angles[b].radians()).then(a.cmp(&b)));
    // widest gap, including the wrap from last to first
    let mut start = 0;
    let mut widest = angles[order[0]].radians() + TAU - angles[order[n - 1]].radians();
    for j in 1..n {
        let gap = angles[order[j]].radians() - angles[order[j - 1]].radians();
        if gap > widest {
            widest = gap;
            start = j;
        }
    }
    let mut resp = vec![0.0; n * m];
    for pos in 0..n {
        let i = order[(start + pos) % n];
        let k = (pos * m / n).min(m - 1);
        resp[i * m + k] = 1.0;
    }
    resp
}

fn random_responsibilities(angles: &[Angle], m: usize, seed: u64, stream: u64) -> Vec<f64> {
    let n = angles.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut centers: Vec<usize> = Vec::with_capacity(m);
    while centers.len() < m {
        let c = rng.random_range(0..n);
        if centers.iter().all(|&o| angles[o] != angles[c]) {
            centers.push(c);
        }
    }
    let mut resp = vec![0.0; n * m];
    for i in 0..n {
        let row = &mut resp[i * m..(i + 1) * m];
        let mut total = 0.0;
        for (k, &c) in centers.iter().enumerate() {
            let jitter: f64 = 0.5 + rng.random::<f64>();
            let v = jitter * (2.0 * (angles[i].radians() - angles[c].radians()).cos()).exp();
            row[k] = v;
            total += v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    resp
}

fn m_step(trig: &Trig, resp: &[f64], m: usize) -> (Vec<f64>, Vec<(f64, f64, f64)>) {
    // per component: (weight sum, sum of w cos, sum of w sin)
    let n = trig.cos.len();
    let mut acc = vec![(0.0, 0.0, 0.0); m];
    for i in 0..n {
        let row = &resp[i * m..(i + 1) * m];
        for k in 0..m {
            let w = row[k];
            acc[k].0 += w;
            acc[k].1 += w * trig.cos[i];
            acc[k].2 += w * trig.sin[i];
        }
    }
    let weights = acc.iter().map(|a| a.0 / n as f64).collect();
    (weights, acc)
}

fn weighted_component(total: f64, c: f64, s: f64, previous_mu: f64) -> (f64, f64) {
    if total <= 0.0 {
        return (previous_mu, 0.0);
    }
    let len = (c * c + s * s).sqrt() / total;
    if len < crate::circular::DEGENERATE_RESULTANT {
        return (previous_mu, 0.0);
    }
    (s.atan2(c), invert_a1(len.min(1.0)))
}

fn run_em(trig: &Trig, mut resp: Vec<f64>, m: usize, config: &EmConfig) -> RunOutcome {
    let n = trig.cos.len();
    let mut mu = vec![0.0; m];
    let mut kappa = vec![0.0; m];
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut terms = vec![0.0; m];
    let mut iteration = 0;
    loop {
        // M-step
        let (weights, acc) = m_step(trig, &resp, m);
        for k in 0..m {
            if weights[k] < config.weight_floor {
                return RunOutcome::Collapsed { component: k, weight: weights[k], iteration, trace };
            }
            let (mk, kk) = weighted_component(acc[k].0, acc[k].1, acc[k].2, mu[k]);
            mu[k] = mk;
            kappa[k] = kk;
        }
        iteration += 1;
        // E-step
        let params: Vec<(f64, f64, f64, f64)> = (0..m)
            .map(|k| {
                let (s, c) = mu[k].sin_cos();
                (weights[k].ln() - LN_2PI - bessel::log_i0(kappa[k]), kappa[k] * c, kappa[k] * s, 0.0)
            })
            .collect();
        let mut ll = 0.0;
        for i in 0..n {
            let mut mx = f64::NEG_INFINITY;
            for k in 0..m {
                let p = &params[k];
                let t = p.0 + p.1 * trig.cos[i] + p.2 * trig.sin[i];
                terms[k] = t;
                mx = mx.max(t);
            }
            let mut sum = 0.0;
            for t in terms.iter_mut() {
                *t = (*t - mx).exp();
                sum += *t;
            }
            ll += mx + sum.ln();
            let row = &mut resp[i * m..(i + 1) * m];
            for k in 0..m {
                row[k] = terms[k] / sum;
            }
        }
        let gain = trace.last().map(|prev| ll - prev);
        trace.push(ll);
        if let Some(g) = gain {
            if g < config.tol {
                converged = true;
            }
        }
        if converged || iteration >= config.max_iter {
            let comps = (0..m)
                .map(|k| VonMisesComponent {
                    mu: Angle::new(mu[k]).expect("finite location"),
                    kappa: kappa[k],
                })
                .collect();
            let mixture = VonMisesMixture { components: comps, weights };
            return RunOutcome::Done { mixture, trace, converged };
        }
    }
}

/// Trapezoid rule over one period with `points` panels.
pub fn integrate_period<F: Fn(Angle) -> f64>(f: F, points: usize) -> f64 {
    let h = TAU / points as f64;
    // periodic integrand: trapezoid reduces to a plain sum
    (0..points)
        .map(|j| f(Angle::new(-PI + h * j as f64).expect("finite")))
        .sum::<f64>()
        * h
}
