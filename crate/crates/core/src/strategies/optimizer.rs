use serde::{Deserialize, Serialize};

use super::{StrategyError, WeightVector};
use crate::linalg::{dot, mat_vec, mean_cov, trace};
use crate::marketdata::MarketDataset;

/// Sample moments of simple returns over a trailing window.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    /// Mean per-period return per asset.
    pub mu: Vec<f64>,
    /// Row-major `N x N` covariance including the ridge.
    pub sigma: Vec<f64>,
    /// Bars used (returns used is one less).
    pub window: usize,
    /// Ridge added to the diagonal.
    pub ridge: f64,
}

impl MomentEstimate {
    pub fn n_assets(&self) -> usize {
        self.mu.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MeanVariance,
    MinVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub objective: Objective,
    /// `lambda` in `mu'w - lambda w'Sigma w`.
    pub risk_aversion: f64,
    pub max_iters: usize,
    /// Multiplier on the `1/L` step, where `L` bounds the gradient's
    /// Lipschitz constant. Values at or below 1 keep ascent monotone.
    pub step_size: f64,
    pub tolerance: f64,
    /// Ridge scale: `eps = ridge * trace(Sigma) / N`.
    pub ridge: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            objective: Objective::MeanVariance,
            risk_aversion: 1.0,
            max_iters: 100_000,
            step_size: 1.0,
            tolerance: 1e-10,
            ridge: 1e-6,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), StrategyError> {
        let bad = |m: &str| Err(StrategyError::InvalidConfig(m.to_string()));
        if !(self.risk_aversion >= 0.0 && self.risk_aversion.is_finite()) {
            return bad("risk_aversion must be finite and non-negative");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(self.step_size > 0.0) {
            return bad("step_size must be positive");
        }
        if !(self.ridge >= 0.0) {
            return bad("ridge must be non-negative");
        }
        Ok(())
    }
}

/// Optimizer output. `converged == false` flags the best iterate returned
/// after `max_iters`.
#[derive(Debug, Clone, PartialEq)]
pub struct MvSolution {
    pub weights: WeightVector,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every accepted iterate, starting with the
    /// initial point.
    pub history: Vec<f64>,
}

/// Euclidean projection onto `{w >= 0, sum w = 1}` by sort and threshold.
pub fn project_to_simplex(x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let mut u = x.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (j, uj) in u.iter().enumerate() {
        css += uj;
        let t = (css - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    x.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// Moments over the last `window` bars of the dataset.
pub fn estimate_moments(ds: &MarketDataset, window: usize, ridge: f64) -> Result<MomentEstimate, StrategyError> {
    estimate_moments_at(ds, ds.n_rows() - 1, window, ridge)
}

/// Moments over the `window` bars ending at row `end` (inclusive); later
/// rows are never read.
pub fn estimate_moments_at(
    ds: &MarketDataset,
    end: usize,
    window: usize,
    ridge: f64,
) -> Result<MomentEstimate, StrategyError> {
    let n = ds.n_tickers();
    let need = n + 2;
    if window < need {
        return Err(StrategyError::WindowTooShort { window, need });
    }
    if end >= ds.n_rows() || end + 1 < window {
        return Err(StrategyError::WindowTooShort { window: (end + 1).min(ds.n_rows()), need: window });
    }
    let start = end + 1 - window;
    let rows: Vec<Vec<f64>> = (start + 1..=end)
        .map(|t| (0..n).map(|i| ds.close(t, i) / ds.close(t - 1, i) - 1.0).collect())
        .collect();
    let (mu, mut sigma) = mean_cov(&rows, n);
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (sigma[i * n + j] + sigma[j * n + i]);
            sigma[i * n + j] = avg;
            sigma[j * n + i] = avg;
        }
    }
    let eps = ridge * trace(&sigma, n) / n as f64;
    (0..n).for_each(|i| sigma[i * n + i] += eps);
    Ok(MomentEstimate { mu, sigma, window, ridge: eps })
}

fn max_abs_row_sum(a: &[f64], n: usize) -> f64 {
    (0..n).map(|i| (0..n).map(|j| a[i * n + j].abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Long-only, fully invested mean-variance (or min-variance) weights by
/// projected gradient ascent from the equal-weight point.
pub fn mean_variance_optimize(m: &MomentEstimate, cfg: &OptimizerConfig) -> Result<MvSolution, StrategyError> {
    cfg.validate()?;
    let n = m.n_assets();
    if n == 0 || m.sigma.len() != n * n {
        return Err(StrategyError::InvalidConfig("moment estimate has inconsistent shape".into()));
    }
    let (lin, quad) = match cfg.objective {
        Objective::MeanVariance => (1.0, cfg.risk_aversion),
        Objective::MinVariance => (0.0, 1.0),
    };
    let objective = |w: &[f64]| lin * dot(&m.mu, w) - quad * dot(w, &mat_vec(&m.sigma, n, w));
    let lipschitz = 2.0 * quad * max_abs_row_sum(&m.sigma, n)
        + lin * m.mu.iter().fold(0.0f64, |a, b| a.max(b.abs()));

    let mut w = vec![1.0 / n as f64; n];
    let mut f = objective(&w);
    let mut history = vec![f];
    if lipschitz <= 0.0 || !lipschitz.is_finite() {
        return Ok(MvSolution { weights: WeightVector::from_assets(&w)?, objective: f, iterations: 0, converged: true, history });
    }
    let mut step = cfg.step_size / lipschitz;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let sw = mat_vec(&m.sigma, n, &w);
        let x: Vec<f64> = (0..n).map(|i| w[i] + step * (lin * m.mu[i] - 2.0 * quad * sw[i])).collect();
        let next = project_to_simplex(&x);
        let f_next = objective(&next);
        if f_next < f - 1e-15 * f.abs().max(1e-300) {
            // step too long for monotone ascent; shrink and retry
            step *= 0.5;
            continue;
        }
        let delta = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        w = next;
        f = f_next.max(f);
        history.push(f_next);
        if delta < cfg.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("mean-variance optimizer hit max_iters={} without converging", cfg.max_iters);
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Ok(MvSolution { weights: WeightVector::from_assets(&w)?, objective: objective(&w), iterations, converged, history })
}

/// The `lambda -> inf` limit: minimizes `w'Sigma w` on the simplex.
pub fn min_variance_optimize(m: &MomentEstimate, cfg: &OptimizerConfig) -> Result<MvSolution, StrategyError> {
    let cfg = OptimizerConfig { objective: Objective::MinVariance, ..cfg.clone() };
    mean_variance_optimize(m, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_examples() {
        let p = project_to_simplex(&[0.5, 0.7]);
        assert!((p[0] - 0.4).abs() < 1e-15 && (p[1] - 0.6).abs() < 1e-15);
        assert_eq!(project_to_simplex(&[2.0, -1.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn exchangeable_assets_split_evenly() {
        let m = MomentEstimate { mu: vec![0.01, 0.01], sigma: vec![0.04, 0.01, 0.01, 0.04], window: 10, ridge: 0.0 };
        let s = mean_variance_optimize(&m, &OptimizerConfig::default()).unwrap();
        assert!((s.weights.assets()[0] - 0.5).abs() < 1e-9);
        assert!(s.converged);
    }
}
