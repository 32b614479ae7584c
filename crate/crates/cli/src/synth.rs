//! Synthetic "two-location decade" ensemble.
//!
//! Two sites, each with `members` ensemble members, for a historical and a
//! future period. Directions come from a von Mises mixture per site, and
//! speeds are Weibull with direction-dependent scale, a diurnal cycle, a
//! mild annual cycle and a per-member, per-year scale factor standing in
//! for internal variability. The coastal site's future scale is reduced by
//! 12%, so its change is large next to the member spread; the inland
//! site's is not changed at all.

use chrono::{DateTime, Datelike, Duration, TimeZone, Timelike, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Weibull};
use std::f64::consts::PI;
use windcond::circular::Angle;
use windcond::ingest::{WindRecord, WindSeries, CALM_THRESHOLD};

pub const HIST_START_YEAR: i32 = 1995;
pub const FUT_START_YEAR: i32 = 2045;

pub struct Site {
    pub name: &'static str,
    /// `(weight, bearing_deg, kappa)` per direction component.
    pub directions: &'static [(f64, f64, f64)],
    pub scale: f64,
    /// Amplitude of the `cos(x - peak)` scale variation.
    pub scale_amp: f64,
    pub peak_deg: f64,
    pub shape: f64,
    pub future_factor: f64,
}

pub const SITES: [Site; 2] = [
    Site {
        name: "coastal",
        directions: &[(0.6, 225.0, 4.0), (0.4, 45.0, 2.0)],
        scale: 8.0,
        scale_amp: 1.5,
        peak_deg: 225.0,
        shape: 2.2,
        future_factor: 0.88,
    },
    Site {
        name: "inland",
        directions: &[(0.7, 270.0, 1.5), (0.3, 135.0, 0.5)],
        scale: 6.0,
        scale_amp: 0.8,
        peak_deg: 300.0,
        shape: 1.8,
        future_factor: 1.0,
    },
];

/// Best and Fisher's rejection sampler, centred at `mu`.
fn von_mises<R: Rng>(rng: &mut R, mu: f64, kappa: f64) -> f64 {
    if kappa < 1e-8 {
        return rng.random_range(-PI..PI);
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
            return mu + theta;
        }
    }
}

fn draw_direction<R: Rng>(rng: &mut R, site: &Site) -> f64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(w, deg, kappa) in site.directions {
        acc += w;
        if u < acc {
            return von_mises(rng, Angle::from_met_deg(deg).expect("finite").radians(), kappa);
        }
    }
    let &(_, deg, kappa) = site.directions.last().expect("components");
    von_mises(rng, Angle::from_met_deg(deg).expect("finite").radians(), kappa)
}

/// Scale at bearing `x`, UTC time `t`, before the member factor.
pub fn site_scale(site: &Site, x: Angle, t: &DateTime<Utc>) -> f64 {
    let peak = Angle::from_met_deg(site.peak_deg).expect("finite");
    let directional = site.scale + site.scale_amp * x.diff(peak).cos();
    let hour = t.hour() as f64;
    let diurnal = 1.0 + 0.08 * (2.0 * PI * (hour - 9.0) / 24.0).sin();
    let annual = 1.0 + 0.1 * (2.0 * PI * (t.month() as f64 - 1.0) / 12.0).cos();
    directional * diurnal * annual
}

/// Nearest double to `x` printed with `decimals` places, so values stay short in CSV.
fn round_to(x: f64, decimals: usize) -> f64 {
    format!("{x:.decimals$}").parse().expect("formatted float parses")
}

/// One member's series: `years` years starting 1 December of `start_year - 1`.
pub fn member_series(
    seed: u64,
    site_ix: usize,
    member: usize,
    future: bool,
    start_year: i32,
    years: i32,
    step_hours: i64,
) -> WindSeries {
    let site = &SITES[site_ix];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((site_ix as u64) << 32) | ((member as u64) << 1) | u64::from(future));
    let start = Utc.with_ymd_and_hms(start_year - 1, 12, 1, 0, 0, 0).unwrap();
    let end = Utc.with_ymd_and_hms(start_year - 1 + years, 12, 1, 0, 0, 0).unwrap();
    let spread = Normal::new(0.0f64, 0.03).expect("valid");
    let year_factor: Vec<f64> = (0..=years).map(|_| spread.sample(&mut rng).exp()).collect();
    let period = if future { site.future_factor } else { 1.0 };
    let mut records = Vec::new();
    let mut t = start;
    while t < end {
        let dir = Angle::new(draw_direction(&mut rng, site)).expect("finite");
        // season-year index: December counts with the following January
        let sy = (t.year() + i32::from(t.month() == 12) - start_year).clamp(0, years) as usize;
        let scale = site_scale(site, dir, &t) * year_factor[sy] * period;
        let speed = Weibull::new(scale, site.shape).expect("positive").sample(&mut rng);
        let speed = round_to(speed, 2);
        let bearing = round_to(dir.to_met_deg(), 1) % 360.0;
        let direction = Some(Angle::from_met_deg(bearing).expect("finite"));
        records.push(WindRecord::new(t, speed, direction, CALM_THRESHOLD));
        t += Duration::hours(step_hours);
    }
    WindSeries::new(site.name, records)
        .expect("ordered")
        .with_member(format!("r{}", member + 1))
        .with_height(10.0)
}

/// All members of both sites for one period.
pub fn period(seed: u64, members: usize, future: bool, years: i32, step_hours: i64) -> Vec<WindSeries> {
    let start = if future { FUT_START_YEAR } else { HIST_START_YEAR };
    let mut out = Vec::new();
    for s in 0..SITES.len() {
        for m in 0..members {
            out.push(member_series(seed, s, m, future, start, years, step_hours));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use windcond::ingest::{filter_season, Season};

    #[test]
    fn decade_has_ten_complete_winters() {
        let s = member_series(1, 0, 0, false, HIST_START_YEAR, 10, 3);
        let djf = filter_season(&s, Season::Djf);
        assert_eq!(djf.complete_years, (1995..=2004).collect::<Vec<_>>());
        assert!(djf.truncated_years.is_empty());
        assert_eq!(filter_season(&s, Season::Jja).complete_years.len(), 10);
    }

    #[test]
    fn members_differ_and_replay() {
        let a = member_series(1, 1, 0, false, HIST_START_YEAR, 1, 3);
        let b = member_series(1, 1, 1, false, HIST_START_YEAR, 1, 3);
        assert_ne!(a.speeds(), b.speeds());
        assert_eq!(a, member_series(1, 1, 0, false, HIST_START_YEAR, 1, 3));
        assert_eq!(a.records()[0].timestamp, b.records()[0].timestamp);
    }
}
