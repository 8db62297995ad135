//! Classical baselines and the mean-/min-variance optimizer, all usable as
//! [`Policy`](crate::agents::Policy) implementations on the portfolio env.

mod optimizer;
mod policies;

pub use optimizer::{
    estimate_moments, estimate_moments_at, mean_variance_optimize, min_variance_optimize, project_to_simplex,
    MomentEstimate, MvSolution, Objective, OptimizerConfig,
};
pub use policies::{equal_weight, passive_hold, rebalancing_policy, EqualWeight, PassiveHold, RebalancingPolicy};

use std::io::Write;

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::marketdata::{format_timestamp, DataError};

/// Tolerance for simplex membership.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("moment window of {window} bars is too short; need at least {need}")]
    WindowTooShort { window: usize, need: usize },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid strategy configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Portfolio weights over `N` assets followed by cash.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    w: Vec<f64>,
}

impl WeightVector {
    /// Checks non-negativity and that the weights sum to one.
    pub fn new(w: Vec<f64>) -> Result<Self, StrategyError> {
        if w.is_empty() {
            return Err(StrategyError::InvalidWeights("empty weight vector".into()));
        }
        if w.iter().any(|x| !x.is_finite() || *x < -SIMPLEX_TOL) {
            return Err(StrategyError::InvalidWeights(format!("weights must be finite and non-negative: {w:?}")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(StrategyError::InvalidWeights(format!("weights sum to {sum}, not 1")));
        }
        Ok(WeightVector { w })
    }

    /// Fully invested allocation over assets (cash weight 0).
    pub fn from_assets(assets: &[f64]) -> Result<Self, StrategyError> {
        let mut w = assets.to_vec();
        w.push(0.0);
        Self::new(w)
    }

    pub fn all_cash(n_assets: usize) -> Self {
        let mut w = vec![0.0; n_assets + 1];
        w[n_assets] = 1.0;
        WeightVector { w }
    }

    pub fn equal(n_assets: usize) -> Self {
        let mut w = vec![1.0 / n_assets as f64; n_assets + 1];
        w[n_assets] = 0.0;
        WeightVector { w }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn assets(&self) -> &[f64] {
        &self.w[..self.w.len() - 1]
    }

    pub fn cash(&self) -> f64 {
        self.w[self.w.len() - 1]
    }

    pub fn n_assets(&self) -> usize {
        self.w.len() - 1
    }

    /// Portfolio-env scores whose softmax reproduces these weights.
    pub fn scores(&self) -> Vec<f64> {
        weights_to_scores(&self.w)
    }
}

/// `ln w`, with zero weights mapped to `-inf`.
pub fn weights_to_scores(w: &[f64]) -> Vec<f64> {
    w.iter().map(|x| if *x > 0.0 { x.ln() } else { f64::NEG_INFINITY }).collect()
}

/// Writes `timestamp,ticker,weight` rows; the cash weight uses ticker `CASH`.
pub fn write_weights_csv<W: Write>(
    out: W,
    tickers: &[String],
    rows: &[(DateTime<Utc>, WeightVector)],
) -> Result<(), StrategyError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "ticker", "weight"]).map_err(csv_err)?;
    for (ts, wv) in rows {
        if wv.n_assets() != tickers.len() {
            return Err(StrategyError::InvalidWeights("weight vector does not match ticker count".into()));
        }
        let stamp = format_timestamp(ts);
        for (name, x) in tickers.iter().map(String::as_str).chain(std::iter::once("CASH")).zip(wv.as_slice()) {
            w.write_record([stamp.as_str(), name, &x.to_string()]).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> StrategyError {
    StrategyError::Io(std::io::Error::other(e))
}
