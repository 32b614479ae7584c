//! Dense tableau simplex for the split-residual quantile regression LP.
//!
//! minimise   tau * sum(u) + (1 - tau) * sum(v)
//! subject to X (b+ - b-) + u - v = y,   b+, b-, u, v >= 0
//!
//! The slack columns give an immediately feasible starting basis, so no
//! phase one is needed. Bland's rule prevents cycling.

pub struct LpSolution {
    pub objective: f64,
    pub beta: Vec<f64>,
    pub pivots: usize,
}

pub fn quantile_lp(design: &[Vec<f64>], y: &[f64], tau: f64) -> LpSolution {
    let n = y.len();
    let p = design[0].len();
    let cols = 2 * p + 2 * n;
    let mut cost = vec![0.0; cols];
    for i in 0..n {
        cost[2 * p + i] = tau;
        cost[2 * p + n + i] = 1.0 - tau;
    }
    // rows: coefficients then rhs
    let mut tab = vec![vec![0.0; cols + 1]; n];
    let mut basis = vec![0usize; n];
    for i in 0..n {
        let sign = if y[i] >= 0.0 { 1.0 } else { -1.0 };
        for j in 0..p {
            tab[i][j] = sign * design[i][j];
            tab[i][p + j] = -sign * design[i][j];
        }
        tab[i][2 * p + i] = sign;
        tab[i][2 * p + n + i] = -sign;
        tab[i][cols] = sign * y[i];
        basis[i] = if sign > 0.0 { 2 * p + i } else { 2 * p + n + i };
    }
    let eps = 1e-11;
    let mut pivots = 0;
    loop {
        // reduced costs
        let mut entering = None;
        for j in 0..cols {
            if basis.contains(&j) {
                continue;
            }
            let mut rc = cost[j];
            for i in 0..n {
                rc -= cost[basis[i]] * tab[i][j];
            }
            if rc < -eps {
                entering = Some(j);
                break;
            }
        }
        let Some(e) = entering else { break };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..n {
            if tab[i][e] > eps {
                let ratio = tab[i][cols] / tab[i][e];
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-14 || (ratio <= lr + 1e-14 && basis[i] < basis[li]) {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let (r, _) = leave.expect("quantile LP is bounded below by zero");
        let pv = tab[r][e];
        for c in 0..=cols {
            tab[r][c] /= pv;
        }
        for i in 0..n {
            if i != r {
                let f = tab[i][e];
                if f != 0.0 {
                    for c in 0..=cols {
                        tab[i][c] -= f * tab[r][c];
                    }
                }
            }
        }
        basis[r] = e;
        pivots += 1;
    }
    let mut x = vec![0.0; cols];
    for i in 0..n {
        x[basis[i]] = tab[i][cols];
    }
    let beta: Vec<f64> = (0..p).map(|j| x[j] - x[p + j]).collect();
    // objective evaluated directly from residuals
    let objective = (0..n)
        .map(|i| {
            let fit: f64 = (0..p).map(|j| design[i][j] * beta[j]).sum();
            let r = y[i] - fit;
            if r >= 0.0 {
                tau * r
            } else {
                (tau - 1.0) * r
            }
        })
        .sum();
    LpSolution { objective, beta, pivots }
}
