use super::FeatureError;
use crate::linalg::{dot, mean_cov, solve_spd, trace};
use crate::marketdata::MarketDataset;

pub const TURBULENCE_COLUMN: &str = "turbulence";

/// Mahalanobis turbulence index. Entries before `lookback` are undefined
/// and hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TurbulenceSeries {
    pub values: Vec<f64>,
    pub lookback: usize,
}

impl TurbulenceSeries {
    pub fn is_defined(&self, t: usize) -> bool {
        t >= self.lookback && t < self.values.len()
    }
}

/// Turbulence `d_t = (y_t - mu)' S^-1 (y_t - mu)` of the simple-return
/// vector `y_t` against the mean and covariance of the returns inside the
/// trailing `lookback` bars `[t - lookback, t)`.
pub fn compute_turbulence(ds: &MarketDataset, lookback: usize) -> Result<TurbulenceSeries, FeatureError> {
    let n = ds.n_tickers();
    if lookback < n + 2 {
        return Err(FeatureError::LookbackTooShort { lookback, min: n + 2 });
    }
    let rows = ds.n_rows();
    let returns: Vec<Vec<f64>> = (0..rows)
        .map(|t| {
            if t == 0 {
                vec![0.0; n]
            } else {
                (0..n).map(|i| ds.close(t, i) / ds.close(t - 1, i) - 1.0).collect()
            }
        })
        .collect();

    let mut values = vec![0.0; rows];
    for t in lookback..rows {
        values[t] = mahalanobis(&returns[t], &returns[t + 1 - lookback..t], n);
    }
    Ok(TurbulenceSeries { values, lookback })
}

pub(crate) fn mahalanobis(y: &[f64], history: &[Vec<f64>], n: usize) -> f64 {
    let (mean, mut cov) = mean_cov(history, n);
    let ridge = (1e-8 * trace(&cov, n) / n as f64).max(1e-18);
    for i in 0..n {
        cov[i * n + i] += ridge;
    }
    let dev: Vec<f64> = y.iter().zip(&mean).map(|(a, b)| a - b).collect();
    match solve_spd(&cov, n, &dev) {
        Some(x) => dot(&dev, &x).max(0.0),
        None => 0.0,
    }
}

/// Appends turbulence as a market-wide column, masked before `lookback`.
pub fn attach_turbulence(ds: &MarketDataset, lookback: usize) -> Result<MarketDataset, FeatureError> {
    if ds.column_index(TURBULENCE_COLUMN).is_some() {
        return Err(FeatureError::NameCollision(TURBULENCE_COLUMN.into()));
    }
    let series = compute_turbulence(ds, lookback)?;
    let n = ds.n_tickers();
    let col: Vec<f64> = series.values.iter().flat_map(|v| std::iter::repeat_n(*v, n)).collect();
    let first = lookback.min(ds.n_rows());
    Ok(ds.with_columns(&[TURBULENCE_COLUMN.to_string()], &[col], &[vec![first; n]])?)
}
