//! Samplers with known distributions.

use rand::Rng;
use std::f64::consts::PI;

/// Best–Fisher rejection sampler for the von Mises distribution, result in
/// `[-pi, pi)`.
pub fn von_mises<R: Rng + ?Sized>(rng: &mut R, mu: f64, kappa: f64) -> f64 {
    if kappa < 1e-8 {
        return wrap(rng.random::<f64>() * 2.0 * PI - PI);
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        let u2: f64 = rng.random();
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let u3: f64 = rng.random();
            let theta = if u3 > 0.5 { f.acos() } else { -f.acos() };
            return wrap(mu + theta);
        }
    }
}

/// Two-component mixture draw.
pub fn von_mises_mixture<R: Rng + ?Sized>(
    rng: &mut R,
    weight1: f64,
    mu: (f64, f64),
    kappa: (f64, f64),
) -> f64 {
    if rng.random::<f64>() < weight1 {
        von_mises(rng, mu.0, kappa.0)
    } else {
        von_mises(rng, mu.1, kappa.1)
    }
}

/// Inverse-CDF Weibull draw `lambda (-ln U)^{1/kappa}`.
pub fn weibull<R: Rng + ?Sized>(rng: &mut R, lambda: f64, kappa: f64) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    lambda * (-u.ln()).powf(1.0 / kappa)
}

pub fn weibull_quantile(lambda: f64, kappa: f64, tau: f64) -> f64 {
    lambda * (-(1.0 - tau).ln()).powf(1.0 / kappa)
}

pub fn exponential<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    -mean * u.ln()
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    use rand_distr::{Distribution, Normal};
    Normal::new(mean, sd).unwrap().sample(rng)
}

pub fn uniform_angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>() * 2.0 * PI - PI
}

pub fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y >= PI {
        -PI
    } else {
        y
    }
}

/// Direction-dependent Weibull whose 50th and 95th quantiles are exactly
/// `8 + 2 cos x` and `11 + 2 cos x`.
pub struct CosineWeibull;

impl CosineWeibull {
    pub fn params(x: f64) -> (f64, f64) {
        let q50 = 8.0 + 2.0 * x.cos();
        let q95 = 11.0 + 2.0 * x.cos();
        let ratio = (20f64.ln() / 2f64.ln()).ln();
        let kappa = ratio / (q95 / q50).ln();
        let lambda = q50 / 2f64.ln().powf(1.0 / kappa);
        (lambda, kappa)
    }

    pub fn quantile(x: f64, tau: f64) -> f64 {
        let (l, k) = Self::params(x);
        weibull_quantile(l, k, tau)
    }

    /// `n` (direction, speed) pairs with uniform directions.
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut dirs = Vec::with_capacity(n);
        let mut speeds = Vec::with_capacity(n);
        for _ in 0..n {
            let x = uniform_angle(rng);
            let (l, k) = Self::params(x);
            dirs.push(x);
            speeds.push(weibull(rng, l, k));
        }
        (dirs, speeds)
    }
}
