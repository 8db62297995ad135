use chrono::{DateTime, TimeZone, Utc};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Bar, DataError, Interval, RawTable};
use crate::linalg::cholesky;
use crate::seed::stream_rng;

/// Scale of the high/low wick noise around the open/close envelope.
const WICK_SCALE: f64 = 0.002;
const BASE_VOLUME: f64 = 1.0e6;

/// Parameters of a correlated geometric Brownian motion, one entry per ticker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub s0: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Row-major `N x N` correlation matrix.
    pub correlation: Vec<f64>,
    pub periods_per_year: u32,
}

impl GbmParams {
    /// Independent assets sharing one drift and volatility.
    pub fn uncorrelated(n: usize, s0: f64, mu: f64, sigma: f64) -> Self {
        let mut correlation = vec![0.0; n * n];
        (0..n).for_each(|i| correlation[i * n + i] = 1.0);
        GbmParams {
            s0: vec![s0; n],
            mu: vec![mu; n],
            sigma: vec![sigma; n],
            correlation,
            periods_per_year: 252,
        }
    }

    fn validate(&self, n: usize) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::InvalidParams(m));
        if self.s0.len() != n || self.mu.len() != n || self.sigma.len() != n || self.correlation.len() != n * n {
            return bad(format!("GBM parameter lengths must match {n} tickers"));
        }
        if self.s0.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return bad("s0 must be positive".into());
        }
        if self.sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0)) || self.mu.iter().any(|m| !m.is_finite()) {
            return bad("mu must be finite and sigma non-negative".into());
        }
        if self.periods_per_year == 0 {
            return bad("periods_per_year must be positive".into());
        }
        for i in 0..n {
            if (self.correlation[i * n + i] - 1.0).abs() > 1e-12 {
                return bad("correlation diagonal must be 1".into());
            }
            for j in 0..i {
                if (self.correlation[i * n + j] - self.correlation[j * n + i]).abs() > 1e-12 {
                    return bad("correlation must be symmetric".into());
                }
            }
        }
        Ok(())
    }
}

/// Simulates daily bars from a correlated GBM.
///
/// Each ticker draws from its own ChaCha stream keyed by `(seed, index)`, so
/// the output is a pure function of the arguments. Row 0 opens and closes at
/// `s0`; each later bar opens at the previous close.
pub fn generate_gbm(params: &GbmParams, tickers: &[String], t_steps: usize, seed: u64) -> Result<RawTable, DataError> {
    generate_gbm_from(params, tickers, t_steps, seed, Utc.with_ymd_and_hms(2000, 1, 3, 0, 0, 0).unwrap())
}

/// [`generate_gbm`] with the first bar stamped at `start`; later bars follow
/// on consecutive calendar days.
pub fn generate_gbm_from(
    params: &GbmParams,
    tickers: &[String],
    t_steps: usize,
    seed: u64,
    start: DateTime<Utc>,
) -> Result<RawTable, DataError> {
    let n = tickers.len();
    if n == 0 {
        return Err(DataError::EmptyInput);
    }
    if t_steps == 0 {
        return Err(DataError::InvalidParams("t_steps must be at least 1".into()));
    }
    params.validate(n)?;
    let chol = cholesky(&params.correlation, n, 1e-10).ok_or(DataError::NonPsdCorrelation)?;

    let dt = 1.0 / params.periods_per_year as f64;
    let mut rngs: Vec<_> = (0..n).map(|i| stream_rng(seed, i as u64)).collect();
    let step = Interval::Day1.duration();

    let mut close = params.s0.clone();
    let mut rows = Vec::with_capacity(n * t_steps);
    for k in 0..t_steps {
        let mut z = vec![0.0; n];
        let mut wick = vec![(0.0, 0.0); n];
        let mut vol_noise = vec![0.0f64; n];
        for (i, rng) in rngs.iter_mut().enumerate() {
            z[i] = rng.sample(StandardNormal);
            let e_hi: f64 = rng.sample(StandardNormal);
            let e_lo: f64 = rng.sample(StandardNormal);
            wick[i] = (e_hi, e_lo);
            vol_noise[i] = rng.sample(StandardNormal);
        }
        let ts = start + step * k as i32;
        for i in 0..n {
            let open = close[i];
            if k > 0 {
                let zc: f64 = (0..=i).map(|j| chol[i * n + j] * z[j]).sum();
                let s = params.sigma[i];
                close[i] = open * ((params.mu[i] - 0.5 * s * s) * dt + s * dt.sqrt() * zc).exp();
            }
            let c = close[i];
            rows.push(Bar {
                timestamp: ts,
                ticker: tickers[i].clone(),
                open,
                high: open.max(c) * (1.0 + (WICK_SCALE * wick[i].0).abs()),
                low: open.min(c) * (1.0 - (WICK_SCALE * wick[i].1).abs().min(0.5)),
                close: c,
                volume: BASE_VOLUME * (0.5 * vol_noise[i]).exp(),
                adjusted_close: None,
            });
        }
    }
    RawTable::from_bars(rows, format!("gbm:{seed}"), Interval::Day1)
}
