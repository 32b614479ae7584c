use proptest::prelude::*;
use rand::Rng;
use std::f64::consts::PI;
use testkit::sample::{uniform_angle, CosineWeibull};
use windcond::circular::{angle_grid, Angle, PeriodicSplineBasis};
use windcond::quantreg::{
    fit_quantile_curve, fit_quantile_curve_pairs, fit_quantile_curves, seam_gap, select_df_elbow,
};
use windcond::ingest::Observation;

fn angles(xs: &[f64]) -> Vec<Angle> {
    xs.iter().map(|&x| Angle::new(x).unwrap()).collect()
}

fn obs(dirs: &[f64], speeds: &[f64]) -> Vec<Observation> {
    dirs.iter().zip(speeds).map(|(&d, &s)| Observation::new(s, Some(Angle::new(d).unwrap()))).collect()
}

#[test]
fn matches_lp_oracle_on_small_instances() {
    let basis = PeriodicSplineBasis::uniform(4, 3).unwrap();
    for seed in 0..20u64 {
        let mut rng = testkit::rng(1000 + seed);
        let (dirs, speeds) = CosineWeibull::draw(&mut rng, 200);
        let tau = [0.25, 0.5, 0.75, 0.9][seed as usize % 4];
        let rows: Vec<Vec<f64>> = dirs.iter().map(|&d| basis.eval(Angle::new(d).unwrap())).collect();
        let oracle = testkit::lp::quantile_lp(&rows, &speeds, tau);
        let fit = fit_quantile_curve_pairs(&angles(&dirs), &speeds, tau, &basis).unwrap();
        let rel = (fit.objective - oracle.objective).abs() / oracle.objective;
        assert!(rel < 1e-8, "seed {seed}: {} vs {}", fit.objective, oracle.objective);
    }
}

#[test]
fn recovers_known_quantile_curves() {
    let mut rng = testkit::rng(7);
    let (dirs, speeds) = CosineWeibull::draw(&mut rng, 100_000);
    let o = obs(&dirs, &speeds);
    let set = fit_quantile_curves(&o, &[0.5, 0.75, 0.95], &PeriodicSplineBasis::default()).unwrap();
    assert!(set.crossings.is_empty(), "{:?}", set.crossings);
    for c in &set.curves {
        let err = angle_grid(720)
            .into_iter()
            .map(|a| (c.eval(a) - CosineWeibull::quantile(a.radians(), c.tau)).abs())
            .fold(0.0, f64::max);
        assert!(err < 0.15, "tau {}: {err}", c.tau);
        let below = dirs.iter().zip(&speeds).filter(|(d, s)| **s <= c.eval(Angle::new(**d).unwrap())).count();
        let frac = below as f64 / speeds.len() as f64;
        let band = 2.0 * (c.tau * (1.0 - c.tau) / speeds.len() as f64).sqrt();
        assert!((frac - c.tau).abs() <= band, "tau {} coverage {frac}", c.tau);
        assert!(seam_gap(c) < 1e-10);
    }
}

#[test]
fn single_and_repeated_levels() {
    let mut rng = testkit::rng(11);
    let (dirs, speeds) = CosineWeibull::draw(&mut rng, 2000);
    let o = obs(&dirs, &speeds);
    let basis = PeriodicSplineBasis::default();
    let one = fit_quantile_curve(&o, 0.6, &basis).unwrap();
    let set = fit_quantile_curves(&o, &[0.6], &basis).unwrap();
    assert_eq!(set.curves[0], one);
    let twice = fit_quantile_curves(&o, &[0.5, 0.5], &basis).unwrap();
    assert_eq!(twice.curves[0].beta, twice.curves[1].beta);
}

#[test]
fn subgradient_certificate() {
    let mut rng = testkit::rng(5);
    let (dirs, speeds) = CosineWeibull::draw(&mut rng, 3000);
    let basis = PeriodicSplineBasis::default();
    let tau = 0.7;
    let c = fit_quantile_curve_pairs(&angles(&dirs), &speeds, tau, &basis).unwrap();
    let mut g = vec![0.0; basis.df()];
    let mut bound = vec![0.0; basis.df()];
    for (d, s) in dirs.iter().zip(&speeds) {
        let z = basis.eval(Angle::new(*d).unwrap());
        let r = s - c.eval(Angle::new(*d).unwrap());
        if r.abs() < 1e-9 {
            z.iter().zip(bound.iter_mut()).for_each(|(zk, b)| *b += zk.abs());
        } else {
            let psi = tau - if r < 0.0 { 1.0 } else { 0.0 };
            z.iter().zip(g.iter_mut()).for_each(|(zk, gk)| *gk += zk * psi);
        }
    }
    for k in 0..g.len() {
        assert!(g[k].abs() <= bound[k] + 1e-9, "coordinate {k}: {} > {}", g[k], bound[k]);
    }
}

#[test]
fn elbow_picks_low_df_for_smooth_truth() {
    let mut rng = testkit::rng(3);
    let mut dirs = Vec::new();
    let mut speeds = Vec::new();
    for _ in 0..20_000 {
        let x = uniform_angle(&mut rng);
        dirs.push(x);
        speeds.push(7.0 + 2.0 * x.cos() + 1.5 * (2.0 * x).sin() + rng.random_range(-1.0..1.0));
    }
    let sel = select_df_elbow(&obs(&dirs, &speeds), 0.5, &[4, 6, 8, 10, 12, 16, 20]).unwrap();
    assert!(sel.chosen_df <= 8, "{:?}", sel.table);
    assert_eq!(sel.table.len(), 7);
}

#[test]
fn elbow_finds_a_bend_at_eight() {
    // noise-free truth that only an 8-function basis reproduces
    let truth = PeriodicSplineBasis::uniform(8, 3).unwrap();
    let beta = [3.0, 9.0, 2.0, 8.0, 1.0, 10.0, 4.0, 7.0];
    let mut rng = testkit::rng(9);
    let mut dirs = Vec::new();
    let mut speeds = Vec::new();
    for _ in 0..8000 {
        let x = uniform_angle(&mut rng);
        dirs.push(x);
        speeds.push(truth.combine(Angle::new(x).unwrap(), &beta) + rng.random_range(-0.05..0.05));
    }
    let sel = select_df_elbow(&obs(&dirs, &speeds), 0.5, &[4, 5, 6, 7, 8, 10, 12, 16, 20, 24]).unwrap();
    assert_eq!(sel.chosen_df, 8, "{:?}", sel.table);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn shifting_speeds_shifts_the_curve(seed in 0u64..1000, c in -3.0f64..3.0, tau in 0.2f64..0.8) {
        let mut rng = testkit::rng(seed);
        let (dirs, speeds) = CosineWeibull::draw(&mut rng, 400);
        let basis = PeriodicSplineBasis::default();
        let a = fit_quantile_curve_pairs(&angles(&dirs), &speeds, tau, &basis).unwrap();
        let shifted: Vec<f64> = speeds.iter().map(|s| s + c).collect();
        let b = fit_quantile_curve_pairs(&angles(&dirs), &shifted, tau, &basis).unwrap();
        for x in angle_grid(72) {
            prop_assert!((b.eval(x) - a.eval(x) - c).abs() < 1e-8);
        }
    }

    #[test]
    fn curves_are_periodic_and_finite(seed in 0u64..1000, tau in 0.1f64..0.9) {
        let mut rng = testkit::rng(seed);
        let (dirs, speeds) = CosineWeibull::draw(&mut rng, 300);
        let c = fit_quantile_curve_pairs(&angles(&dirs), &speeds, tau, &PeriodicSplineBasis::default()).unwrap();
        prop_assert!(seam_gap(&c) < 1e-10);
        let lhs = c.basis.combine(Angle::new(-PI).unwrap(), &c.beta);
        prop_assert!(lhs.is_finite());
        prop_assert!(angle_grid(360).into_iter().all(|a| c.eval(a).is_finite()));
    }
}
