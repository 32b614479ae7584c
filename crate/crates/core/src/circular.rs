//! Angles, circular summaries and the two periodic basis families.
//!
//! All angles inside the crate are radians in `[-pi, pi)`. Meteorological
//! degrees (direction the wind blows *from*, clockwise from north) are
//! converted at the edges with [`Angle::from_met_deg`] and
//! [`Angle::to_met_deg`]: the compass bearing `d` maps to `d * pi / 180`
//! wrapped into `[-pi, pi)`, so north is `0`, east is `pi/2`, south is `-pi`
//! and west is `-pi/2`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircularError {
    #[error("angle is not finite: {0}")]
    NonFinite(f64),
    #[error("circular mean of an empty set")]
    Empty,
    #[error("circular mean undefined: resultant length {0:e} is below 1e-10")]
    DegenerateMean(f64),
    #[error("weights and angles differ in length ({weights} vs {angles})")]
    LengthMismatch { weights: usize, angles: usize },
    #[error("invalid periodic spline basis: {0}")]
    InvalidBasis(String),
}

/// Resultant lengths below this leave the mean direction undefined.
pub const DEGENERATE_RESULTANT: f64 = 1e-10;

/// An angle in radians, always stored inside `[-pi, pi)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(into = "f64", try_from = "f64")]
pub struct Angle(f64);

impl Angle {
    /// Wraps any finite radian value into `[-pi, pi)`.
    pub fn new(radians: f64) -> Result<Self, CircularError> {
        if !radians.is_finite() {
            return Err(CircularError::NonFinite(radians));
        }
        Ok(Angle(wrap(radians)))
    }

    /// From a meteorological bearing in degrees.
    pub fn from_met_deg(deg: f64) -> Result<Self, CircularError> {
        if !deg.is_finite() {
            return Err(CircularError::NonFinite(deg));
        }
        Ok(Angle(wrap(deg.to_radians())))
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// Meteorological bearing in `[0, 360)`.
    pub fn to_met_deg(self) -> f64 {
        let d = self.0.to_degrees().rem_euclid(360.0);
        if d >= 360.0 {
            0.0
        } else {
            d
        }
    }

    /// Signed shortest rotation from `other` to `self`, in `[-pi, pi)`.
    pub fn diff(self, other: Angle) -> f64 {
        wrap(self.0 - other.0)
    }

    pub fn rotate(self, by: f64) -> Angle {
        Angle(wrap(self.0 + by))
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

impl TryFrom<f64> for Angle {
    type Error = CircularError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Angle::new(v)
    }
}

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to exactly TAU
    if y >= PI {
        -PI
    } else {
        y
    }
}

/// Input to [`normalize_angle`].
#[derive(Debug, Clone, Copy)]
pub enum RawAngle {
    Radians(f64),
    MetDegrees(f64),
}

pub fn normalize_angle(raw: RawAngle) -> Result<Angle, CircularError> {
    match raw {
        RawAngle::Radians(r) => Angle::new(r),
        RawAngle::MetDegrees(d) => Angle::from_met_deg(d),
    }
}

/// Mean direction and mean resultant length of a (weighted) sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resultant {
    pub mean: Angle,
    /// `|sum w e^{i theta}| / sum w`, in `[0, 1]`.
    pub length: f64,
}

/// Mean direction and resultant length, failing when the mean is undefined.
pub fn resultant(angles: &[Angle], weights: Option<&[f64]>) -> Result<Resultant, CircularError> {
    if angles.is_empty() {
        return Err(CircularError::Empty);
    }
    let (mut c, mut s, mut total) = (0.0, 0.0, 0.0);
    match weights {
        Some(w) => {
            if w.len() != angles.len() {
                return Err(CircularError::LengthMismatch { weights: w.len(), angles: angles.len() });
            }
            for (a, &wi) in angles.iter().zip(w) {
                let (sn, cs) = a.0.sin_cos();
                c += wi * cs;
                s += wi * sn;
                total += wi;
            }
        }
        None => {
            for a in angles {
                let (sn, cs) = a.0.sin_cos();
                c += cs;
                s += sn;
            }
            total = angles.len() as f64;
        }
    }
    if total <= 0.0 {
        return Err(CircularError::Empty);
    }
    let length = (c * c + s * s).sqrt() / total;
    if length < DEGENERATE_RESULTANT {
        return Err(CircularError::DegenerateMean(length));
    }
    Ok(Resultant { mean: Angle(wrap(s.atan2(c))), length: length.min(1.0) })
}

/// `atan2` of the mean sine and mean cosine.
pub fn circular_mean(angles: &[Angle]) -> Result<Angle, CircularError> {
    resultant(angles, None).map(|r| r.mean)
}

/// Periodic B-spline basis on `[-pi, pi)`.
///
/// The basis has one function per knot. Function `k` is the sum of every
/// period-shifted copy of the ordinary B-spline that starts at knot `k`
/// on the infinitely replicated knot sequence, so the basis is smooth to
/// order `degree - 1` everywhere including across the `±pi` seam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSplineBasis {
    degree: usize,
    knots: Vec<f64>,
}

impl Default for PeriodicSplineBasis {
    /// Eight cubic functions on uniform knots.
    fn default() -> Self {
        PeriodicSplineBasis::uniform(8, 3).expect("default basis is valid")
    }
}

impl PeriodicSplineBasis {
    /// `df` uniform knots starting at `-pi`.
    pub fn uniform(df: usize, degree: usize) -> Result<Self, CircularError> {
        if df == 0 {
            return Err(CircularError::InvalidBasis("degrees of freedom must be positive".into()));
        }
        let knots = (0..df).map(|j| -PI + TAU * j as f64 / df as f64).collect();
        Self::with_knots(knots, degree)
    }

    /// Custom knots: strictly increasing, inside `[-pi, pi)`, at least
    /// `degree + 1` of them.
    pub fn with_knots(knots: Vec<f64>, degree: usize) -> Result<Self, CircularError> {
        if knots.len() < degree + 1 {
            return Err(CircularError::InvalidBasis(format!(
                "{} knots cannot carry a degree {} periodic spline (need at least {})",
                knots.len(),
                degree,
                degree + 1
            )));
        }
        if knots.iter().any(|k| !k.is_finite() || *k < -PI || *k >= PI) {
            return Err(CircularError::InvalidBasis("knots must lie in [-pi, pi)".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CircularError::InvalidBasis("knots must be strictly increasing".into()));
        }
        Ok(PeriodicSplineBasis { degree, knots })
    }

    pub fn df(&self) -> usize {
        self.knots.len()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    // knot j of the replicated sequence
    fn knot(&self, j: isize) -> f64 {
        let s = self.knots.len() as isize;
        let q = j.div_euclid(s);
        let r = j.rem_euclid(s) as usize;
        self.knots[r] + TAU * q as f64
    }

    /// Basis values `Z(x)`, length [`df`](Self::df).
    pub fn eval(&self, x: Angle) -> Vec<f64> {
        let mut out = vec![0.0; self.df()];
        self.eval_into(x, &mut out);
        out
    }

    /// Writes `Z(x)` into `out`, which must have length `df`.
    pub fn eval_into(&self, x: Angle, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let (first, vals) = self.nonzero(x);
        let s = self.df();
        for (r, v) in vals.iter().enumerate() {
            out[(first + r) % s] += v;
        }
    }

    /// Index of the first nonzero basis function and the `degree + 1`
    /// nonzero values, in order. Indices wrap modulo `df`.
    pub fn nonzero(&self, x: Angle) -> (usize, Vec<f64>) {
        let s = self.df();
        let p = self.degree;
        let start = self.knots[0];
        let mut xv = x.0;
        if xv < start {
            xv += TAU;
        }
        // span i with t_i <= x < t_{i+1}
        let mut i = match self.knots.binary_search_by(|k| k.partial_cmp(&xv).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        if i >= s {
            i = s - 1;
        }
        let i = i as isize;
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = xv - self.knot(i + 1 - j as isize);
            right[j] = self.knot(i + j as isize) - xv;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        let first = (i - p as isize).rem_euclid(s as isize) as usize;
        (first, n)
    }

    /// `Z(x)' beta`.
    pub fn combine(&self, x: Angle, beta: &[f64]) -> f64 {
        let s = self.df();
        let (first, vals) = self.nonzero(x);
        vals.iter().enumerate().map(|(r, v)| v * beta[(first + r) % s]).sum()
    }
}

/// Fourier design rows `[1?, cos x, sin x, ..., cos Kx, sin Kx]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarmonicBasis {
    pub num_harmonics: usize,
    pub include_intercept: bool,
}

impl HarmonicBasis {
    pub fn new(num_harmonics: usize, include_intercept: bool) -> Self {
        HarmonicBasis { num_harmonics, include_intercept }
    }

    pub fn len(&self) -> usize {
        2 * self.num_harmonics + usize::from(self.include_intercept)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn eval(&self, x: Angle) -> Vec<f64> {
        self.eval_radians(x.0)
    }

    /// Like [`eval`](Self::eval) but without wrapping, for checking periodicity.
    pub fn eval_radians(&self, x: f64) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.len());
        if self.include_intercept {
            row.push(1.0);
        }
        for k in 1..=self.num_harmonics {
            let (s, c) = (k as f64 * x).sin_cos();
            row.push(c);
            row.push(s);
        }
        row
    }

    /// Human-readable name of design column `j`.
    pub fn column_name(&self, j: usize) -> String {
        let j = if self.include_intercept {
            if j == 0 {
                return "intercept".into();
            }
            j - 1
        } else {
            j
        };
        let k = j / 2 + 1;
        if j % 2 == 0 {
            format!("cos({k}x)")
        } else {
            format!("sin({k}x)")
        }
    }
}

/// `n` equally spaced angles starting at `-pi`.
pub fn angle_grid(n: usize) -> Vec<Angle> {
    (0..n).map(|j| Angle(wrap(-PI + TAU * j as f64 / n as f64))).collect()
}

/// Angles at meteorological bearings `0, 1, ..., n-1` times `360 / n` degrees.
pub fn met_grid(n: usize) -> Vec<(f64, Angle)> {
    (0..n)
        .map(|j| {
            let d = 360.0 * j as f64 / n as f64;
            (d, Angle(wrap(d.to_radians())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn a(x: f64) -> Angle {
        Angle::new(x).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(a(0.0).radians(), 0.0);
        assert_eq!(a(3.0 * PI).radians(), -PI);
        assert_eq!(a(PI).radians(), -PI);
        let east = Angle::from_met_deg(90.0).unwrap();
        assert_abs_diff_eq!(east.radians(), PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(east.to_met_deg(), 90.0, epsilon = 1e-12);
        assert!(matches!(Angle::new(f64::NAN), Err(CircularError::NonFinite(_))));
        assert!(normalize_angle(RawAngle::MetDegrees(f64::INFINITY)).is_err());
    }

    #[test]
    fn met_degrees_round_trip() {
        for i in 0..3600 {
            let d = i as f64 * 0.1;
            let back = Angle::from_met_deg(d).unwrap().to_met_deg();
            assert!((back - d).abs() < 1e-9, "{d} -> {back}");
        }
    }

    #[test]
    fn circular_mean_examples() {
        assert_eq!(circular_mean(&[a(0.0)]).unwrap().radians(), 0.0);
        let eps = 0.01;
        let m = circular_mean(&[a(-PI / 2.0 + eps), a(PI / 2.0 - eps)]).unwrap();
        assert_abs_diff_eq!(m.radians(), 0.0, epsilon = 1e-12);
        let m = circular_mean(&[a(PI - 0.1), a(-PI + 0.1)]).unwrap();
        // pi wraps to -pi
        assert_abs_diff_eq!(m.diff(a(PI)), 0.0, epsilon = 1e-12);
        assert!(m.radians().abs() > 3.0);
    }

    #[test]
    fn circular_mean_errors() {
        assert_eq!(circular_mean(&[]), Err(CircularError::Empty));
        assert!(matches!(
            circular_mean(&[a(0.0), a(PI)]),
            Err(CircularError::DegenerateMean(_))
        ));
    }

    #[test]
    fn harmonic_rows() {
        let b1 = HarmonicBasis::new(1, false);
        let r = b1.eval(a(0.0));
        assert_eq!(r, vec![1.0, 0.0]);
        let b2 = HarmonicBasis::new(2, false);
        let r = b2.eval(a(PI / 2.0));
        let expect = [0.0, 1.0, -1.0, 0.0];
        for (x, e) in r.iter().zip(expect) {
            assert_abs_diff_eq!(*x, e, epsilon = 1e-15);
        }
        assert_eq!(HarmonicBasis::new(3, true).len(), 7);
        assert_eq!(HarmonicBasis::new(3, true).column_name(4), "sin(2x)");
    }

    #[test]
    fn spline_rejects_bad_knots() {
        assert!(PeriodicSplineBasis::uniform(3, 3).is_err());
        assert!(PeriodicSplineBasis::with_knots(vec![-1.0, 0.0, 0.0, 1.0, 2.0], 3).is_err());
        assert!(PeriodicSplineBasis::with_knots(vec![-1.0, 0.0, 1.0, 2.0, 3.5], 3).is_err());
        assert!(PeriodicSplineBasis::uniform(4, 3).is_ok());
    }

    #[test]
    fn spline_seam_and_derivative_continuity() {
        for (df, deg) in [(8, 3), (5, 2), (12, 3), (4, 3), (6, 1)] {
            let b = PeriodicSplineBasis::uniform(df, deg).unwrap();
            let at_pi = b.eval(Angle::new(PI).unwrap());
            let at_mpi = b.eval(Angle::new(-PI).unwrap());
            assert_eq!(at_pi, at_mpi);
            // one-sided values and slopes agree across the seam
            let h = 1e-6;
            let lo = b.eval(a(PI - h));
            let lo2 = b.eval(a(PI - 2.0 * h));
            let hi = b.eval(a(-PI + h));
            let hi2 = b.eval(a(-PI + 2.0 * h));
            for k in 0..df {
                let v_lo = 2.0 * lo[k] - lo2[k];
                let v_hi = 2.0 * hi[k] - hi2[k];
                assert!((v_lo - v_hi).abs() < 1e-9);
                if deg >= 2 {
                    let d_lo = (lo[k] - lo2[k]) / h;
                    let d_hi = (hi2[k] - hi[k]) / h;
                    assert!((d_lo - d_hi).abs() < 1e-4, "df {df} deg {deg} k {k}: {d_lo} {d_hi}");
                }
            }
        }
    }

    #[test]
    fn nonuniform_knots_partition_of_unity() {
        let knots = vec![-3.0, -2.2, -0.5, 0.1, 0.4, 1.9, 2.8];
        let b = PeriodicSplineBasis::with_knots(knots, 3).unwrap();
        for i in 0..500 {
            let x = a(-PI + TAU * i as f64 / 500.0);
            let z = b.eval(x);
            assert_abs_diff_eq!(z.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        // x below the first knot wraps onto the last span
        let z = b.eval(a(-3.1));
        assert_abs_diff_eq!(z.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn normalize_idempotent_and_periodic(x in -1e3f64..1e3, k in -50i32..50) {
            let n = a(x);
            prop_assert_eq!(a(n.radians()), n);
            prop_assert!(n.radians() >= -PI && n.radians() < PI);
            let shifted = a(x + TAU * k as f64);
            prop_assert!(shifted.diff(n).abs() < 1e-9);
        }

        #[test]
        fn circular_mean_rotation_equivariant(
            xs in proptest::collection::vec(-1.0f64..1.0, 1..20),
            c in -10.0f64..10.0,
        ) {
            let base: Vec<Angle> = xs.iter().map(|&x| a(x)).collect();
            let rot: Vec<Angle> = xs.iter().map(|&x| a(x + c)).collect();
            let m0 = circular_mean(&base).unwrap();
            let m1 = circular_mean(&rot).unwrap();
            prop_assert!(m1.diff(m0.rotate(c)).abs() < 1e-9);
        }

        #[test]
        fn spline_partition_of_unity(x in -PI..PI, df in 4usize..16, deg in 1usize..4) {
            prop_assume!(df > deg);
            let b = PeriodicSplineBasis::uniform(df, deg).unwrap();
            let z = b.eval(a(x));
            prop_assert_eq!(z.len(), df);
            prop_assert!(z.iter().all(|&v| (0.0..=1.0 + 1e-15).contains(&v)));
            prop_assert!((z.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn harmonic_row_periodic(x in -PI..PI, k in 1usize..6) {
            let b = HarmonicBasis::new(k, true);
            let r0 = b.eval_radians(x);
            let r1 = b.eval_radians(x + TAU);
            for (u, v) in r0.iter().zip(&r1) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }
    }
}
