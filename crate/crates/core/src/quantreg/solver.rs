//! Dense linear quantile regression.
//!
//! A primal-dual interior point method on the bounded dual gets close to
//! the optimum cheaply; a vertex descent then walks to an exact basic
//! solution, so the returned coefficients interpolate `p` observations and
//! the objective is the true minimum up to rounding.

use nalgebra::{DMatrix, DVector};

/// Row-major design matrix.
#[derive(Debug, Clone)]
pub struct Design {
    pub n: usize,
    pub p: usize,
    pub data: Vec<f64>,
}

impl Design {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let p = rows.first().map_or(0, Vec::len);
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Design { n: rows.len(), p, data }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    fn dot(&self, i: usize, v: &[f64]) -> f64 {
        self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RqSolution {
    pub beta: Vec<f64>,
    pub objective: f64,
    /// Indices of the interpolated observations.
    pub basis: Vec<usize>,
    pub ip_iterations: usize,
    pub pivots: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RqFailure {
    /// No `p` linearly independent rows exist; carries the design columns
    /// that no row touches, if any.
    RankDeficient(Vec<usize>),
    PivotLimit { pivots: usize, objective: f64 },
}

pub fn pinball(r: f64, tau: f64) -> f64 {
    if r >= 0.0 {
        tau * r
    } else {
        (tau - 1.0) * r
    }
}

pub fn objective(x: &Design, y: &[f64], beta: &[f64], tau: f64) -> f64 {
    (0..x.n).map(|i| pinball(y[i] - x.dot(i, beta), tau)).sum()
}

fn solve_sym(m: DMatrix<f64>, rhs: DVector<f64>) -> DVector<f64> {
    match m.clone().cholesky() {
        Some(c) => c.solve(&rhs),
        None => {
            let svd = m.svd(true, true);
            let tol = svd.singular_values.max() * 1e-13;
            svd.solve(&rhs, tol).expect("U and V were computed")
        }
    }
}

fn least_squares(x: &Design, y: &[f64]) -> Vec<f64> {
    let p = x.p;
    let mut g = DMatrix::zeros(p, p);
    let mut b = DVector::zeros(p);
    for i in 0..x.n {
        let r = x.row(i);
        for a in 0..p {
            b[a] += r[a] * y[i];
            for c in 0..=a {
                g[(a, c)] += r[a] * r[c];
            }
        }
    }
    for a in 0..p {
        for c in 0..a {
            g[(c, a)] = g[(a, c)];
        }
    }
    solve_sym(g, b).iter().copied().collect()
}

fn step_bound(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

/// Mehrotra predictor-corrector on `max y'a  s.t.  X'a = (1-tau) X'1,
/// 0 <= a <= 1`. Returns the coefficient estimate and iteration count.
fn interior_point(x: &Design, y: &[f64], tau: f64, max_iter: usize, tol: f64) -> (Vec<f64>, usize) {
    let (n, p) = (x.n, x.p);
    let beta0 = least_squares(x, y);
    let mut lam: Vec<f64> = beta0.iter().map(|b| -b).collect();
    let res: Vec<f64> = (0..n).map(|i| y[i] - x.dot(i, &beta0)).collect();
    let scale = res.iter().map(|r| r.abs()).sum::<f64>() / n as f64;
    let eps = 1e-3 * scale.max(1e-8);
    let mut z: Vec<f64> = res.iter().map(|r| (-r).max(0.0) + eps).collect();
    let mut w: Vec<f64> = res.iter().map(|r| r.max(0.0) + eps).collect();
    let mut a = vec![1.0 - tau; n];
    let mut s = vec![tau; n];

    let mut q = vec![0.0; n];
    let mut rr = vec![0.0; n];
    let mut dx = vec![0.0; n];
    let mut ds = vec![0.0; n];
    let mut dz = vec![0.0; n];
    let mut dw = vec![0.0; n];
    let mut iters = 0;
    while iters < max_iter {
        let gap: f64 = (0..n).map(|i| a[i] * z[i] + s[i] * w[i]).sum();
        let dual_obj: f64 = (0..n).map(|i| y[i] * a[i]).sum();
        if gap <= tol * (1.0 + dual_obj.abs()) {
            break;
        }
        iters += 1;
        let mut m = DMatrix::zeros(p, p);
        let mut rhs = DVector::zeros(p);
        for i in 0..n {
            q[i] = 1.0 / (z[i] / a[i] + w[i] / s[i]);
            rr[i] = z[i] - w[i];
            let r = x.row(i);
            for j in 0..p {
                rhs[j] += q[i] * rr[i] * r[j];
                for k in 0..=j {
                    m[(j, k)] += q[i] * r[j] * r[k];
                }
            }
        }
        for j in 0..p {
            for k in 0..j {
                m[(k, j)] = m[(j, k)];
            }
        }
        // predictor
        let dl = solve_sym(m.clone(), rhs);
        for i in 0..n {
            dx[i] = q[i] * (x.dot(i, dl.as_slice()) - rr[i]);
            ds[i] = -dx[i];
            dz[i] = -z[i] - z[i] / a[i] * dx[i];
            dw[i] = -w[i] + w[i] / s[i] * dx[i];
        }
        let mut fp = (0.9995 * step_bound(&a, &dx).min(step_bound(&s, &ds))).min(1.0);
        let mut fd = (0.9995 * step_bound(&z, &dz).min(step_bound(&w, &dw))).min(1.0);
        let mut dl = dl;
        if fp.min(fd) < 1.0 {
            // corrector
            let g: f64 = (0..n)
                .map(|i| (z[i] + fd * dz[i]) * (a[i] + fp * dx[i]) + (w[i] + fd * dw[i]) * (s[i] + fp * ds[i]))
                .sum();
            let mu = gap * (g / gap).powi(3) / (2.0 * n as f64);
            let mut rhs = DVector::zeros(p);
            let mut h = vec![0.0; n];
            for i in 0..n {
                h[i] = (mu - dx[i] * dz[i]) / a[i] - (mu - ds[i] * dw[i]) / s[i] - rr[i];
                let r = x.row(i);
                for j in 0..p {
                    rhs[j] -= q[i] * h[i] * r[j];
                }
            }
            dl = solve_sym(m, rhs);
            for i in 0..n {
                let (dxa, dza, dsa, dwa) = (dx[i], dz[i], ds[i], dw[i]);
                dx[i] = q[i] * (x.dot(i, dl.as_slice()) + h[i]);
                ds[i] = -dx[i];
                dz[i] = (mu - dxa * dza - z[i] * dx[i]) / a[i] - z[i];
                dw[i] = (mu - dsa * dwa + w[i] * dx[i]) / s[i] - w[i];
            }
            fp = (0.9995 * step_bound(&a, &dx).min(step_bound(&s, &ds))).min(1.0);
            fd = (0.9995 * step_bound(&z, &dz).min(step_bound(&w, &dw))).min(1.0);
        }
        for i in 0..n {
            a[i] += fp * dx[i];
            s[i] += fp * ds[i];
            z[i] += fd * dz[i];
            w[i] += fd * dw[i];
        }
        for j in 0..p {
            lam[j] += fd * dl[j];
        }
    }
    (lam.iter().map(|l| -l).collect(), iters)
}

/// Greedy choice of `p` independent rows, smallest residual first.
fn initial_basis(x: &Design, r: &[f64]) -> Result<Vec<usize>, RqFailure> {
    let p = x.p;
    let mut order: Vec<usize> = (0..x.n).collect();
    order.sort_by(|&i, &j| r[i].abs().total_cmp(&r[j].abs()).then(i.cmp(&j)));
    let mut chosen = Vec::with_capacity(p);
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(p);
    for &i in &order {
        let row = x.row(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let mut v: Vec<f64> = row.iter().map(|c| c / norm).collect();
        for _ in 0..2 {
            for u in &ortho {
                let d: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(vi, ui)| *vi -= d * ui);
            }
        }
        let len = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if len > 1e-6 {
            v.iter_mut().for_each(|c| *c /= len);
            ortho.push(v);
            chosen.push(i);
            if chosen.len() == p {
                return Ok(chosen);
            }
        }
    }
    let untouched = (0..p).filter(|&j| (0..x.n).all(|i| x.row(i)[j] == 0.0)).collect();
    Err(RqFailure::RankDeficient(untouched))
}

/// Exact pinball-loss minimiser starting from the interior point estimate.
pub fn rq_fit(x: &Design, y: &[f64], tau: f64) -> Result<RqSolution, RqFailure> {
    let (n, p) = (x.n, x.p);
    let (beta_ip, ip_iterations) = interior_point(x, y, tau, 100, 1e-11);
    let r0: Vec<f64> = (0..n).map(|i| y[i] - x.dot(i, &beta_ip)).collect();
    let mut basis = initial_basis(x, &r0)?;

    let ymax = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol_r = 1e-10 * (1.0 + ymax);
    let max_pivots = 50 * n.max(100);
    let mut pivots = 0;
    let mut r = vec![0.0; n];
    let mut coef = vec![0.0; n * p];
    loop {
        let xh = DMatrix::from_fn(p, p, |a, b| x.row(basis[a])[b]);
        let Some(inv) = xh.try_inverse() else {
            return Err(RqFailure::RankDeficient(Vec::new()));
        };
        let yh = DVector::from_fn(p, |a, _| y[basis[a]]);
        let beta: Vec<f64> = (&inv * yh).iter().copied().collect();
        for i in 0..n {
            r[i] = y[i] - x.dot(i, &beta);
        }
        for &h in &basis {
            r[h] = 0.0;
        }
        // coef[i][j]: change in the fit at i per unit move along edge j
        for i in 0..n {
            let row = x.row(i);
            for j in 0..p {
                coef[i * p + j] = (0..p).map(|k| row[k] * inv[(k, j)]).sum();
            }
        }
        for (a, &h) in basis.iter().enumerate() {
            for j in 0..p {
                coef[h * p + j] = if a == j { 1.0 } else { 0.0 };
            }
        }
        let mut up = vec![0.0; p];
        let mut down = vec![0.0; p];
        let mut mass = vec![0.0; p];
        for i in 0..n {
            for j in 0..p {
                let c = coef[i * p + j];
                mass[j] += c.abs();
                if r[i] > tol_r {
                    up[j] -= c * tau;
                    down[j] += c * tau;
                } else if r[i] < -tol_r {
                    up[j] += c * (1.0 - tau);
                    down[j] -= c * (1.0 - tau);
                } else {
                    up[j] += ((1.0 - tau) * c).max(-tau * c);
                    down[j] += ((1.0 - tau) * -c).max(tau * c);
                }
            }
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..p {
            for (sign, d) in [(1.0, up[j]), (-1.0, down[j])] {
                if d < -1e-12 * (1.0 + mass[j]) && best.map_or(true, |(_, _, bd)| d < bd) {
                    best = Some((j, sign, d));
                }
            }
        }
        let Some((j, sign, mut slope)) = best else {
            let objective = r.iter().map(|&v| pinball(v, tau)).sum();
            return Ok(RqSolution { beta, objective, basis, ip_iterations, pivots });
        };
        if pivots >= max_pivots {
            let objective = r.iter().map(|&v| pinball(v, tau)).sum();
            return Err(RqFailure::PivotLimit { pivots, objective });
        }
        pivots += 1;
        // weighted median of the breakpoints along the chosen edge
        let mut brk: Vec<(f64, f64, usize)> = (0..n)
            .filter(|&i| r[i].abs() > tol_r)
            .filter_map(|i| {
                let c = sign * coef[i * p + j];
                let t = r[i] / c;
                (c != 0.0 && t > 0.0).then_some((t, c.abs(), i))
            })
            .collect();
        brk.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        let mut entering = None;
        for &(_, weight, i) in &brk {
            slope += weight;
            if slope >= 0.0 {
                entering = Some(i);
                break;
            }
        }
        match entering {
            Some(i) => basis[j] = i,
            // cannot happen for 0 < tau < 1: the leaving point bounds the slope
            None => return Err(RqFailure::PivotLimit { pivots, objective: f64::NAN }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random(n: usize, p: usize, seed: u64) -> (Design, Vec<f64>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut r = vec![1.0];
                r.extend((1..p).map(|_| rng.random_range(-1.0..1.0)));
                r
            })
            .collect();
        let y = rows.iter().map(|r| r.iter().sum::<f64>() + rng.random_range(-1.0..1.0_f64).powi(3)).collect();
        (Design::from_rows(&rows), y)
    }

    #[test]
    fn intercept_only_is_a_sample_quantile() {
        let y: Vec<f64> = (0..101).map(|i| ((i * 37) % 101) as f64).collect();
        let x = Design::from_rows(&vec![vec![1.0]; 101]);
        let sol = rq_fit(&x, &y, 0.5).unwrap();
        assert_eq!(sol.beta[0], 50.0);
        let sol = rq_fit(&x, &y, 0.9).unwrap();
        assert_eq!(sol.beta[0], 90.0);
    }

    #[test]
    fn vertex_is_optimal_against_perturbations() {
        for seed in 0..5 {
            let (x, y) = random(300, 3, seed);
            for tau in [0.1, 0.5, 0.93] {
                let sol = rq_fit(&x, &y, tau).unwrap();
                assert!((objective(&x, &y, &sol.beta, tau) - sol.objective).abs() < 1e-9);
                for k in 0..3 {
                    for h in [1e-4, -1e-4] {
                        let mut b = sol.beta.clone();
                        b[k] += h;
                        assert!(objective(&x, &y, &b, tau) >= sol.objective - 1e-12);
                    }
                }
                // interpolation property of a basic solution
                for &i in &sol.basis {
                    assert!((y[i] - x.dot(i, &sol.beta)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let rows = vec![vec![1.0, 0.0]; 20];
        let y = vec![1.0; 20];
        assert_eq!(rq_fit(&Design::from_rows(&rows), &y, 0.5), Err(RqFailure::RankDeficient(vec![1])));
    }
}
