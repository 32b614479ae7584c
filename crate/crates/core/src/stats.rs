//! Small descriptive statistics shared across modules.
//!
//! Spreads are population spreads (divide by `n`). Quantiles use linear
//! interpolation between order statistics at position `p (n - 1)`
//! (zero-based), the rule R and NumPy call type 7.

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn pop_sd(xs: &[f64]) -> f64 {
    // one correction pass so identical values give exactly zero
    let m0 = mean(xs);
    let m = m0 + xs.iter().map(|x| x - m0).sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Type-7 quantile of `xs`; `p` is clamped to `[0, 1]`.
///
/// Returns `NaN` for an empty slice.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

/// Type-7 quantile of an already sorted slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let p = p.clamp(0.0, 1.0);
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Minimum, lower quartile, median, upper quartile, maximum.
pub fn five_number(xs: &[f64]) -> [f64; 5] {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    [0.0, 0.25, 0.5, 0.75, 1.0].map(|p| quantile_sorted(&v, p))
}
