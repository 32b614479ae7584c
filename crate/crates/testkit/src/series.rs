//! Power series for the modified Bessel functions.

/// `I_0(x)` by summing `(x/2)^{2k} / (k!)^2` until the terms vanish.
///
/// Every term is positive so there is no cancellation; f64 holds the
/// largest term up to roughly x = 700.
pub fn bessel_i0(x: f64) -> f64 {
    bessel_series(x, 0)
}

/// `I_1(x)` by summing `(x/2)^{2k+1} / (k! (k+1)!)`.
pub fn bessel_i1(x: f64) -> f64 {
    bessel_series(x, 1)
}

fn bessel_series(x: f64, order: u32) -> f64 {
    let half = x / 2.0;
    let q = half * half;
    let mut term = half.powi(order as i32);
    for j in 1..=order {
        term /= j as f64;
    }
    // Kahan summation
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut k = 0u32;
    loop {
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        k += 1;
        term *= q / (k as f64 * (k + order) as f64);
        if term <= sum * 1e-18 && k as f64 > half {
            break;
        }
    }
    sum
}
