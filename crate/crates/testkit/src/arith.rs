//! Spreadsheet-style arithmetic for small ensembles and least squares.

/// Population standard deviation written out longhand.
pub fn pop_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mut total = 0.0;
    for x in xs {
        total += x;
    }
    let mean = total / n;
    let mut ss = 0.0;
    for x in xs {
        ss += (x - mean) * (x - mean);
    }
    (ss / n).sqrt()
}

/// Linear-interpolation quantile at position `p (n - 1)` of the sorted sample.
pub fn quantile_type7(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = p * (v.len() as f64 - 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// `table[member][time]`.
pub fn iv_mean(table: &[Vec<f64>]) -> f64 {
    let n = table.len();
    let t = table[0].len();
    let mut acc = 0.0;
    for ti in 0..t {
        let col: Vec<f64> = (0..n).map(|m| table[m][ti]).collect();
        let sd = pop_sd(&col);
        acc += sd * sd;
    }
    (acc / t as f64).sqrt()
}

/// Spread of per-member standard deviations about each member's own mean.
pub fn iv_sd(table: &[Vec<f64>]) -> f64 {
    let sds: Vec<f64> = table.iter().map(|row| pop_sd(row)).collect();
    pop_sd(&sds)
}

/// Spread of per-member standard deviations about the grand ensemble mean.
pub fn iv_sd_grand_mean(table: &[Vec<f64>]) -> f64 {
    let n = table.len() as f64;
    let t = table[0].len() as f64;
    let grand: f64 = table.iter().flatten().sum::<f64>() / (n * t);
    let sds: Vec<f64> = table
        .iter()
        .map(|row| (row.iter().map(|y| (y - grand).powi(2)).sum::<f64>() / t).sqrt())
        .collect();
    pop_sd(&sds)
}

pub fn iv_q95(table: &[Vec<f64>]) -> f64 {
    let qs: Vec<f64> = table.iter().map(|row| quantile_type7(row, 0.95)).collect();
    pop_sd(&qs)
}

/// Solves `(X' W X) b = X' W y` by Gaussian elimination with partial pivoting.
pub fn gls(design: &[Vec<f64>], weights: &[f64], y: &[f64]) -> Vec<f64> {
    let p = design[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (row, (&w, &yi)) in design.iter().zip(weights.iter().zip(y)) {
        for r in 0..p {
            for c in 0..p {
                a[r][c] += w * row[r] * row[c];
            }
            a[r][p] += w * row[r] * yi;
        }
    }
    for col in 0..p {
        let piv = (col..p)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        for r in 0..p {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=p {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..p).map(|i| a[i][p] / a[i][i]).collect()
}
