//! Textbook Cox–de Boor recursion over an explicitly unrolled knot vector.

use std::f64::consts::PI;

/// Recursive B-spline `N_{i,p}(x)` on knot vector `t` (half-open supports).
pub fn cox_de_boor(t: &[f64], i: usize, p: usize, x: f64) -> f64 {
    if p == 0 {
        return if t[i] <= x && x < t[i + 1] { 1.0 } else { 0.0 };
    }
    let mut left = 0.0;
    let d1 = t[i + p] - t[i];
    if d1 > 0.0 {
        left = (x - t[i]) / d1 * cox_de_boor(t, i, p - 1, x);
    }
    let mut right = 0.0;
    let d2 = t[i + p + 1] - t[i + 1];
    if d2 > 0.0 {
        right = (t[i + p + 1] - x) / d2 * cox_de_boor(t, i + 1, p - 1, x);
    }
    left + right
}

/// Periodic basis values at `x` for the given one-period knots.
///
/// The knot sequence is replicated over three periods, every ordinary
/// B-spline on the long vector is evaluated, and each one is folded onto
/// its periodic index. `x` is evaluated in the middle period.
pub fn periodic_basis(knots: &[f64], degree: usize, x: f64) -> Vec<f64> {
    let s = knots.len();
    let period = 2.0 * PI;
    let reps = 3 + degree / s + 1;
    let mut t = Vec::new();
    for r in 0..reps {
        for &k in knots {
            t.push(k + (r as f64 - 1.0) * period);
        }
    }
    // map x into the middle copy
    let mut xm = x;
    while xm < knots[0] {
        xm += period;
    }
    while xm >= knots[0] + period {
        xm -= period;
    }
    let mut out = vec![0.0; s];
    for i in 0..t.len() - degree - 1 {
        let v = cox_de_boor(&t, i, degree, xm);
        out[i % s] += v;
    }
    out
}
