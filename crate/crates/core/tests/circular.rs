use proptest::prelude::*;
use std::f64::consts::PI;
use testkit::deboor::periodic_basis;
use windcond::circular::{
    angle_grid, circular_mean, met_grid, normalize_angle, resultant, Angle, CircularError, PeriodicSplineBasis,
    RawAngle,
};

#[test]
fn bearing_conversion() {
    let east = normalize_angle(RawAngle::MetDegrees(90.0)).unwrap();
    assert!((east.radians() - PI / 2.0).abs() < 1e-15);
    let north = normalize_angle(RawAngle::MetDegrees(360.0)).unwrap();
    assert_eq!(north.radians(), 0.0);
    let south = normalize_angle(RawAngle::MetDegrees(180.0)).unwrap();
    assert_eq!(south.radians(), -PI);
    assert!((normalize_angle(RawAngle::MetDegrees(270.0)).unwrap().radians() + PI / 2.0).abs() < 1e-15);
    assert!(normalize_angle(RawAngle::Radians(f64::NAN)).is_err());
    assert!((Angle::from_met_deg(-10.0).unwrap().to_met_deg() - 350.0).abs() < 1e-12);
}

#[test]
fn mean_across_north() {
    let xs = [350.0, 10.0].map(|d| Angle::from_met_deg(d).unwrap());
    let m = circular_mean(&xs).unwrap();
    assert!(m.radians().abs() < 1e-15);
    let opposite = [0.0, 180.0].map(|d| Angle::from_met_deg(d).unwrap());
    assert!(matches!(circular_mean(&opposite), Err(CircularError::DegenerateMean(_))));
    let w = resultant(&xs, Some(&[3.0, 1.0])).unwrap();
    assert!(w.mean.to_met_deg() > 350.0);
}

#[test]
fn default_basis_matches_de_boor_at_zero() {
    let b = PeriodicSplineBasis::default();
    assert_eq!((b.df(), b.degree()), (8, 3));
    let got = b.eval(Angle::new(0.0).unwrap());
    let want = periodic_basis(b.knots(), 3, 0.0);
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-12, "{got:?} vs {want:?}");
    }
}

#[test]
fn grids() {
    let g = met_grid(360);
    assert_eq!(g.len(), 360);
    assert_eq!(g[90].0, 90.0);
    assert!((g[90].1.radians() - PI / 2.0).abs() < 1e-12);
    let a = angle_grid(720);
    assert_eq!(a[0].radians(), -PI);
    assert!(a.windows(2).all(|w| w[1].radians() > w[0].radians()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn basis_matches_oracle(x in -PI..PI, df in 4usize..14, degree in 1usize..4) {
        let b = PeriodicSplineBasis::uniform(df, degree).unwrap();
        let got = b.eval(Angle::new(x).unwrap());
        let want = periodic_basis(b.knots(), degree, x);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-12);
        }
        prop_assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(got.iter().all(|&v| v >= -1e-15));
    }

    #[test]
    fn irregular_knots_match_oracle(mut k in proptest::collection::vec(-PI..PI, 6..10), x in -PI..PI) {
        k.sort_by(|a, b| a.partial_cmp(b).unwrap());
        k.dedup_by(|a, b| (*a - *b).abs() < 0.05);
        prop_assume!(k.len() >= 5 && k[k.len() - 1] - k[0] < 2.0 * PI - 0.05);
        let b = PeriodicSplineBasis::with_knots(k.clone(), 3).unwrap();
        let got = b.eval(Angle::new(x).unwrap());
        let want = periodic_basis(&k, 3, x);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-10);
        }
    }

    #[test]
    fn wrap_is_idempotent(x in -1e4f64..1e4) {
        let a = Angle::new(x).unwrap();
        prop_assert!(a.radians() >= -PI && a.radians() < PI);
        prop_assert_eq!(Angle::new(a.radians()).unwrap(), a);
        prop_assert!(((x - a.radians()) / (2.0 * PI)).fract().abs().min(1.0 - ((x - a.radians()) / (2.0 * PI)).fract().abs()) < 1e-9);
    }

    #[test]
    fn mean_rotates(xs in proptest::collection::vec(-0.5f64..0.5, 2..40), c in -PI..PI) {
        let base: Vec<Angle> = xs.iter().map(|&x| Angle::new(x).unwrap()).collect();
        let rot: Vec<Angle> = xs.iter().map(|&x| Angle::new(x + c).unwrap()).collect();
        let m = circular_mean(&base).unwrap().rotate(c);
        prop_assert!(m.diff(circular_mean(&rot).unwrap()).abs() < 1e-12);
    }
}
