//! Small dense linear algebra on row-major `Vec<f64>` matrices.

/// Cholesky factor `L` (row-major, lower triangular) of a symmetric matrix.
///
/// Pivots in `[-tol, 0]` are treated as zero (positive semi-definite input);
/// returns `None` when a pivot drops below `-tol`.
pub fn cholesky(a: &[f64], n: usize, tol: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d < -tol {
            return None;
        }
        let d = d.max(0.0).sqrt();
        l[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = if d > 0.0 { s / d } else { 0.0 };
        }
    }
    Some(l)
}

/// Solves `A x = b` for symmetric positive-definite `A` via Cholesky.
pub fn solve_spd(a: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    let l = cholesky(a, n, 0.0)?;
    if (0..n).any(|i| l[i * n + i] <= 0.0) {
        return None;
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

pub fn mat_vec(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum())
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn trace(a: &[f64], n: usize) -> f64 {
    (0..n).map(|i| a[i * n + i]).sum()
}

/// Sample mean and (n-1)-denominator covariance of `rows`, each of length `n`.
pub fn mean_cov(rows: &[Vec<f64>], n: usize) -> (Vec<f64>, Vec<f64>) {
    let m = rows.len() as f64;
    let mut mean = vec![0.0; n];
    for r in rows {
        for i in 0..n {
            mean[i] += r[i];
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    let mut cov = vec![0.0; n * n];
    for r in rows {
        for i in 0..n {
            let di = r[i] - mean[i];
            for j in i..n {
                cov[i * n + j] += di * (r[j] - mean[j]);
            }
        }
    }
    let denom = if rows.len() > 1 { m - 1.0 } else { 1.0 };
    for i in 0..n {
        for j in i..n {
            let v = cov[i * n + j] / denom;
            cov[i * n + j] = v;
            cov[j * n + i] = v;
        }
    }
    (mean, cov)
}
