//! Quantile regression of speed on a periodic B-spline of direction.
//!
//! For each level `tau` the coefficients minimise the pinball loss
//! `sum rho_tau(ws_i - Z(wd_i)' beta)`. Curves for different levels are
//! fitted independently; crossings are reported and left alone.

pub mod solver;

use crate::circular::{angle_grid, met_grid, Angle, CircularError, PeriodicSplineBasis};
use crate::ingest::{directional_pairs, Observation, CALM_THRESHOLD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use solver::{Design, RqFailure};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantRegError {
    #[error("tau must lie in (0, 1), got {0}")]
    InvalidTau(f64),
    #[error("{n} directional observations; a basis with {df} functions needs at least {needed}")]
    TooFewObservations { n: usize, df: usize, needed: usize },
    #[error("tau = {tau} leaves fewer than {df} of {n} observations in the tail")]
    InsufficientTail { tau: f64, n: usize, df: usize },
    #[error("coefficients not identifiable: {0}")]
    Unidentifiable(String),
    #[error("solver stopped after {pivots} pivots (objective {objective})")]
    NonConvergence { pivots: usize, objective: f64 },
    #[error("non-finite input at observation {0}")]
    NonFinite(usize),
    #[error("the elbow rule needs at least 3 candidate dfs, got {0}")]
    TooFewCandidates(usize),
    #[error("invalid candidate dfs: {0}")]
    InvalidCandidates(String),
    #[error("{}", format_per_tau(.0))]
    PerTau(Vec<(f64, QuantRegError)>),
    #[error(transparent)]
    Circular(#[from] CircularError),
}

fn format_per_tau(errs: &[(f64, QuantRegError)]) -> String {
    errs.iter().map(|(t, e)| format!("tau {t}: {e}")).collect::<Vec<_>>().join("; ")
}

fn check_tau(tau: f64) -> Result<(), QuantRegError> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(QuantRegError::InvalidTau(tau))
    }
}

/// The check loss `y (tau - 1{y < 0})`.
pub fn pinball_loss(y: f64, tau: f64) -> Result<f64, QuantRegError> {
    check_tau(tau)?;
    Ok(solver::pinball(y, tau))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub ip_iterations: usize,
    pub pivots: usize,
}

/// `Q(tau | x) = Z(x)' beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalQuantileCurve {
    pub tau: f64,
    pub basis: PeriodicSplineBasis,
    pub beta: Vec<f64>,
    /// Pinball objective at the optimum.
    pub objective: f64,
    pub n: usize,
    pub diagnostics: SolverDiagnostics,
}

/// Serialized curve. Knots are in degrees on the internal axis, `[-180, 180)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveJson {
    pub tau: f64,
    pub df: usize,
    pub degree: usize,
    pub knots_deg: Vec<f64>,
    pub beta: Vec<f64>,
    pub objective: f64,
    pub n: usize,
}

impl DirectionalQuantileCurve {
    pub fn eval(&self, x: Angle) -> f64 {
        self.basis.combine(x, &self.beta)
    }

    /// Values at the 360 whole-degree bearings `0..360`.
    pub fn table(&self) -> Vec<(f64, f64)> {
        met_grid(360).into_iter().map(|(d, a)| (d, self.eval(a))).collect()
    }

    pub fn to_json(&self) -> CurveJson {
        CurveJson {
            tau: self.tau,
            df: self.basis.df(),
            degree: self.basis.degree(),
            knots_deg: self.basis.knots().iter().map(|k| k.to_degrees()).collect(),
            beta: self.beta.clone(),
            objective: self.objective,
            n: self.n,
        }
    }

    pub fn from_json(j: &CurveJson) -> Result<Self, QuantRegError> {
        check_tau(j.tau)?;
        let knots = j.knots_deg.iter().map(|k| k.to_radians()).collect();
        let basis = PeriodicSplineBasis::with_knots(knots, j.degree)?;
        if j.beta.len() != basis.df() || j.df != basis.df() {
            return Err(QuantRegError::InvalidCandidates(format!(
                "curve has {} coefficients for {} basis functions",
                j.beta.len(),
                basis.df()
            )));
        }
        Ok(DirectionalQuantileCurve {
            tau: j.tau,
            basis,
            beta: j.beta.clone(),
            objective: j.objective,
            n: j.n,
            diagnostics: SolverDiagnostics { ip_iterations: 0, pivots: 0 },
        })
    }
}

/// Fits one level from paired directions and speeds.
pub fn fit_quantile_curve_pairs(
    dirs: &[Angle],
    speeds: &[f64],
    tau: f64,
    basis: &PeriodicSplineBasis,
) -> Result<DirectionalQuantileCurve, QuantRegError> {
    check_tau(tau)?;
    let (n, s) = (speeds.len(), basis.df());
    if let Some(i) = speeds.iter().position(|v| !v.is_finite()) {
        return Err(QuantRegError::NonFinite(i));
    }
    if n < 10 * s {
        return Err(QuantRegError::TooFewObservations { n, df: s, needed: 10 * s });
    }
    if tau * (n as f64) < s as f64 || (1.0 - tau) * (n as f64) < s as f64 {
        return Err(QuantRegError::InsufficientTail { tau, n, df: s });
    }
    let mut data = vec![0.0; n * s];
    for (i, d) in dirs.iter().enumerate() {
        basis.eval_into(*d, &mut data[i * s..(i + 1) * s]);
    }
    let design = Design { n, p: s, data };
    match solver::rq_fit(&design, speeds, tau) {
        Ok(sol) => Ok(DirectionalQuantileCurve {
            tau,
            basis: basis.clone(),
            beta: sol.beta,
            objective: sol.objective,
            n,
            diagnostics: SolverDiagnostics { ip_iterations: sol.ip_iterations, pivots: sol.pivots },
        }),
        Err(RqFailure::RankDeficient(cols)) if cols.is_empty() => Err(QuantRegError::Unidentifiable(
            "directions do not span the spline basis".into(),
        )),
        Err(RqFailure::RankDeficient(cols)) => {
            let names: Vec<String> = cols
                .iter()
                .map(|&j| format!("spline {j} (around {:.0} deg)", support_centre_deg(basis, j)))
                .collect();
            Err(QuantRegError::Unidentifiable(format!("no observations under {}", names.join(", "))))
        }
        Err(RqFailure::PivotLimit { pivots, objective }) => Err(QuantRegError::NonConvergence { pivots, objective }),
    }
}

// bearing near the peak of basis function j
fn support_centre_deg(basis: &PeriodicSplineBasis, j: usize) -> f64 {
    angle_grid(720)
        .into_iter()
        .max_by(|a, b| basis.eval(*a)[j].total_cmp(&basis.eval(*b)[j]))
        .map_or(0.0, |a| a.to_met_deg())
}

/// Fits one level. Calm records and records without a direction are skipped.
pub fn fit_quantile_curve(
    obs: &[Observation],
    tau: f64,
    basis: &PeriodicSplineBasis,
) -> Result<DirectionalQuantileCurve, QuantRegError> {
    let (dirs, speeds) = directional_pairs(obs, CALM_THRESHOLD);
    fit_quantile_curve_pairs(&dirs, &speeds, tau, basis)
}

/// Angles where a lower level's curve exceeds a higher one's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub tau_low: f64,
    pub tau_high: f64,
    /// Grid points (of 720) with `Q(tau_low) > Q(tau_high)`.
    pub points: usize,
    pub max_violation: f64,
    /// Bearing of the largest violation.
    pub worst_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileCurveSet {
    /// In the order the levels were requested.
    pub curves: Vec<DirectionalQuantileCurve>,
    pub crossings: Vec<Crossing>,
}

/// Checks every pair of distinct levels on a 720-point grid.
pub fn crossing_report(curves: &[DirectionalQuantileCurve]) -> Vec<Crossing> {
    let grid = angle_grid(720);
    let values: Vec<Vec<f64>> = curves.iter().map(|c| grid.iter().map(|&a| c.eval(a)).collect()).collect();
    let mut out = Vec::new();
    for i in 0..curves.len() {
        for j in 0..curves.len() {
            if curves[i].tau >= curves[j].tau {
                continue;
            }
            let mut points = 0;
            let mut worst = (0.0, 0.0);
            for (k, a) in grid.iter().enumerate() {
                let v = values[i][k] - values[j][k];
                if v > 1e-9 {
                    points += 1;
                    if v > worst.0 {
                        worst = (v, a.to_met_deg());
                    }
                }
            }
            if points > 0 {
                out.push(Crossing {
                    tau_low: curves[i].tau,
                    tau_high: curves[j].tau,
                    points,
                    max_violation: worst.0,
                    worst_deg: worst.1,
                });
            }
        }
    }
    out
}

/// Independent fits for several levels, run in parallel.
pub fn fit_quantile_curves(
    obs: &[Observation],
    taus: &[f64],
    basis: &PeriodicSplineBasis,
) -> Result<QuantileCurveSet, QuantRegError> {
    let (dirs, speeds) = directional_pairs(obs, CALM_THRESHOLD);
    let results: Vec<_> = taus.par_iter().map(|&t| fit_quantile_curve_pairs(&dirs, &speeds, t, basis)).collect();
    let mut curves = Vec::new();
    let mut errors = Vec::new();
    for (t, r) in taus.iter().zip(results) {
        match r {
            Ok(c) => curves.push(c),
            Err(e) => errors.push((*t, e)),
        }
    }
    if !errors.is_empty() {
        return Err(QuantRegError::PerTau(errors));
    }
    let crossings = crossing_report(&curves);
    Ok(QuantileCurveSet { curves, crossings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowRow {
    pub df: usize,
    pub mae: f64,
    /// Distance to the first-last chord after scaling both axes to [0, 1].
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowSelection {
    pub chosen_df: usize,
    pub table: Vec<ElbowRow>,
}

/// Elbow of a (df, MAE) polyline: the point farthest from the chord joining
/// its ends, with both axes rescaled to [0, 1]. Ties go to the smaller df.
pub fn elbow_of(points: &[(usize, f64)]) -> Result<ElbowSelection, QuantRegError> {
    if points.len() < 3 {
        return Err(QuantRegError::TooFewCandidates(points.len()));
    }
    let (d0, dn) = (points[0].0 as f64, points[points.len() - 1].0 as f64);
    let lo = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let norm: Vec<(f64, f64)> = points.iter().map(|&(d, m)| ((d as f64 - d0) / (dn - d0), (m - lo) / span)).collect();
    let (x0, y0) = norm[0];
    let (x1, y1) = norm[norm.len() - 1];
    let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
    let table: Vec<ElbowRow> = points
        .iter()
        .zip(&norm)
        .map(|(&(df, mae), &(x, y))| ElbowRow {
            df,
            mae,
            distance: ((x1 - x0) * (y0 - y) - (x0 - x) * (y1 - y0)).abs() / len,
        })
        .collect();
    let mut chosen = 0;
    for (k, row) in table.iter().enumerate() {
        if row.distance > table[chosen].distance + 1e-12 {
            chosen = k;
        }
    }
    Ok(ElbowSelection { chosen_df: table[chosen].df, table })
}

/// Fits cubic uniform bases with each candidate df, records the mean
/// absolute residual, and picks the elbow.
pub fn select_df_elbow(obs: &[Observation], tau: f64, candidates: &[usize]) -> Result<ElbowSelection, QuantRegError> {
    check_tau(tau)?;
    if candidates.len() < 3 {
        return Err(QuantRegError::TooFewCandidates(candidates.len()));
    }
    if candidates.windows(2).any(|w| w[1] <= w[0]) || candidates[0] < 4 {
        return Err(QuantRegError::InvalidCandidates(format!(
            "{candidates:?} must be strictly ascending and at least 4"
        )));
    }
    let (dirs, speeds) = directional_pairs(obs, CALM_THRESHOLD);
    let maes: Vec<Result<(usize, f64), QuantRegError>> = candidates
        .par_iter()
        .map(|&df| {
            let basis = PeriodicSplineBasis::uniform(df, 3)?;
            let c = fit_quantile_curve_pairs(&dirs, &speeds, tau, &basis)?;
            let mae = dirs.iter().zip(&speeds).map(|(d, v)| (v - c.eval(*d)).abs()).sum::<f64>() / speeds.len() as f64;
            Ok((df, mae))
        })
        .collect();
    let points = maes.into_iter().collect::<Result<Vec<_>, _>>()?;
    elbow_of(&points)
}

/// Periodic seam check used in tests and diagnostics: `Q(-pi)` against the
/// limit from the right end of the axis.
pub fn seam_gap(curve: &DirectionalQuantileCurve) -> f64 {
    let left = curve.eval(Angle::new(-PI).expect("finite"));
    let right = curve.eval(Angle::new(PI - 1e-12).expect("finite"));
    (left - right).abs()
}
