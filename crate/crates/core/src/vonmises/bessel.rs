//! Modified Bessel functions of the first kind, orders 0 and 1.
//!
//! Below [`SERIES_LIMIT`] the defining power series is summed directly
//! (all terms are positive, so it is accurate to a few ulps). Above it
//! the exponentially scaled Hankel expansion is truncated at its smallest
//! term, which at `x = 30` is already below `e^{-60}`.

use std::f64::consts::PI;

const SERIES_LIMIT: f64 = 30.0;

/// `e^{-x} I_0(x)` for `x >= 0`.
pub fn i0e(x: f64) -> f64 {
    scaled(x, 0)
}

/// `e^{-x} I_1(x)` for `x >= 0`.
pub fn i1e(x: f64) -> f64 {
    scaled(x, 1)
}

/// `ln I_0(x)`; finite for every finite `x >= 0`.
pub fn log_i0(x: f64) -> f64 {
    x + i0e(x).ln()
}

/// `I_1(x) / I_0(x)`, the mean resultant length of a von Mises
/// distribution with concentration `x`.
pub fn a1(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    i1e(x) / i0e(x)
}

fn scaled(x: f64, order: u32) -> f64 {
    if x < SERIES_LIMIT {
        series(x, order) * (-x).exp()
    } else {
        hankel(x, order)
    }
}

fn series(x: f64, order: u32) -> f64 {
    let half = 0.5 * x;
    let q = half * half;
    let mut term = if order == 0 { 1.0 } else { half };
    let mut sum = term;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + order as f64));
        sum += term;
        if term <= sum * 1e-17 {
            return sum;
        }
        k += 1.0;
    }
}

fn hankel(x: f64, order: u32) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut k = 1.0;
    loop {
        let odd = 2.0 * k - 1.0;
        let next = -term * (mu - odd * odd) / (8.0 * k * x);
        if next.abs() >= term.abs() || next.abs() < 1e-17 * sum.abs() {
            if next.abs() < term.abs() {
                sum += next;
            }
            break;
        }
        sum += next;
        term = next;
        k += 1.0;
    }
    sum / (2.0 * PI * x).sqrt()
}
