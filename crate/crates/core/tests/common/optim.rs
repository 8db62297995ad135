//! Brute-force optimizer oracles over simplex grids.

use marketforge::strategies::MomentEstimate;
use rand::Rng;

/// `mu.w - lambda w'Sw` for mean-variance, `-w'Sw` when `lambda` is `None`.
pub fn objective(m: &MomentEstimate, lambda: Option<f64>, w: &[f64]) -> f64 {
    let n = w.len();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            q += w[i] * m.sigma[i * n + j] * w[j];
        }
    }
    match lambda {
        Some(l) => m.mu.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() - l * q,
        None => -q,
    }
}

/// Exhaustive search over the simplex grid `{k * step}`.
pub fn grid_best(m: &MomentEstimate, lambda: Option<f64>, step: f64) -> (Vec<f64>, f64) {
    let n = m.mu.len();
    let k = (1.0 / step).round() as usize;
    let mut best = (vec![], f64::NEG_INFINITY);
    let mut idx = vec![0usize; n - 1];
    loop {
        let used: usize = idx.iter().sum();
        if used <= k {
            let mut w: Vec<f64> = idx.iter().map(|i| *i as f64 / k as f64).collect();
            w.push((k - used) as f64 / k as f64);
            let f = objective(m, lambda, &w);
            if f > best.1 {
                best = (w, f);
            }
        }
        let mut d = 0;
        loop {
            if d == n - 1 {
                return best;
            }
            idx[d] += 1;
            if idx[d] <= k {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

pub fn random_psd(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let a: Vec<f64> = (0..n * n).map(|_| rng.random_range(-0.2..0.2)).collect();
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            s[i * n + j] = (0..n).map(|k| a[i * n + k] * a[j * n + k]).sum();
        }
    }
    s
}

/// Projection oracle by successive grid refinement (three coordinates).
pub fn grid_projection(x: &[f64]) -> Vec<f64> {
    let dist = |a: f64, b: f64| {
        let c = 1.0 - a - b;
        if a < 0.0 || b < 0.0 || c < -1e-12 {
            return f64::INFINITY;
        }
        let c = c.max(0.0);
        (a - x[0]).powi(2) + (b - x[1]).powi(2) + (c - x[2]).powi(2)
    };
    let (mut best_a, mut best_b, mut step) = (1.0 / 3.0, 1.0 / 3.0, 0.01);
    let mut best = dist(best_a, best_b);
    for i in 0..=100 {
        for j in 0..=100 - i {
            let d = dist(i as f64 * 0.01, j as f64 * 0.01);
            if d < best {
                (best, best_a, best_b) = (d, i as f64 * 0.01, j as f64 * 0.01);
            }
        }
    }
    while step > 1e-10 {
        let (ca, cb) = (best_a, best_b);
        for i in -20..=20 {
            for j in -20..=20 {
                let (a, b) = ((ca + i as f64 * step / 10.0).max(0.0), (cb + j as f64 * step / 10.0).max(0.0));
                let d = dist(a, b);
                if d < best {
                    (best, best_a, best_b) = (d, a, b);
                }
            }
        }
        step /= 10.0;
    }
    vec![best_a, best_b, (1.0 - best_a - best_b).max(0.0)]
}
