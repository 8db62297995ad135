use std::sync::Arc;

use chrono::{DateTime, Utc};

use super::{reward_for, EnvConfig, EnvError, EnvState, Environment, FeatureNormalizer, Observation, StepInfo, StepResult};
use crate::marketdata::MarketDataset;

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioState {
    pub value: f64,
    /// Drifted weights `[w_1..w_N, w_cash]`; cash is the last entry.
    pub weights: Vec<f64>,
    pub prices: Vec<f64>,
    pub features: Vec<f64>,
    pub t: usize,
}

/// Numerically stable softmax. `-inf` scores map to exactly zero weight.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

/// Continuous portfolio allocation over `N` assets plus cash.
///
/// Actions are `N + 1` scores mapped to weights by softmax. Rebalancing from
/// the drifted weights pays `cost_rate` on asset turnover.
#[derive(Debug, Clone)]
pub struct PortfolioEnv {
    data: Arc<MarketDataset>,
    cfg: EnvConfig,
    normalizer: Option<FeatureNormalizer>,
    risk_col: Option<usize>,
    t: usize,
    value: f64,
    weights: Vec<f64>,
    done: bool,
}

impl PortfolioEnv {
    pub fn new(data: Arc<MarketDataset>, cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        if data.n_rows() < 2 {
            return Err(EnvError::InvalidConfig("dataset needs at least 2 rows".into()));
        }
        let risk_col = match cfg.risk_indicator.column() {
            None => None,
            Some(name) => Some(data.column_index(name).ok_or_else(|| {
                EnvError::InvalidConfig(format!("risk indicator column `{name}` missing from dataset"))
            })?),
        };
        let n = data.n_tickers();
        let mut weights = vec![0.0; n + 1];
        weights[n] = 1.0;
        Ok(PortfolioEnv { value: cfg.initial_capital, data, cfg, normalizer: None, risk_col, t: 0, weights, done: false })
    }

    pub fn with_normalizer(mut self, normalizer: FeatureNormalizer) -> Result<Self, EnvError> {
        if !normalizer.matches(&self.data) {
            return Err(EnvError::InvalidConfig("normalizer shape does not match dataset".into()));
        }
        self.normalizer = Some(normalizer);
        Ok(self)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn dataset(&self) -> &Arc<MarketDataset> {
        &self.data
    }

    pub fn set_initial_capital(&mut self, capital: f64) {
        self.cfg.initial_capital = capital;
    }

    pub fn state(&self) -> PortfolioState {
        PortfolioState {
            value: self.value,
            weights: self.weights.clone(),
            prices: self.data.closes_at(self.t),
            features: self.data.row(self.t).to_vec(),
            t: self.t,
        }
    }
}

impl Environment for PortfolioEnv {
    fn reset(&mut self, _seed: u64) -> Observation {
        let n = self.data.n_tickers();
        self.t = 0;
        self.value = self.cfg.initial_capital;
        self.weights = vec![0.0; n + 1];
        self.weights[n] = 1.0;
        self.done = false;
        self.observation()
    }

    fn step(&mut self, scores: &[f64]) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        let n = self.data.n_tickers();
        if scores.len() != n + 1 {
            return Err(EnvError::ShapeMismatch { expected: n + 1, got: scores.len() });
        }
        if scores.iter().any(|s| s.is_nan() || *s == f64::INFINITY) || scores.iter().all(|s| *s == f64::NEG_INFINITY) {
            return Err(EnvError::NonFiniteAction);
        }
        let t = self.t;
        let risk_triggered = self
            .risk_col
            .is_some_and(|c| self.data.get(t, 0, c) > self.cfg.risk_threshold);
        let target = if risk_triggered {
            let mut w = vec![0.0; n + 1];
            w[n] = 1.0;
            w
        } else {
            softmax(scores)
        };

        let v_before = self.value;
        let turnover: f64 = (0..n).map(|i| (target[i] - self.weights[i]).abs()).sum();
        let cost = self.cfg.cost_rate * v_before * turnover;
        let returns: Vec<f64> = (0..n).map(|i| self.data.close(t + 1, i) / self.data.close(t, i) - 1.0).collect();
        let growth: f64 = 1.0 + (0..n).map(|i| target[i] * returns[i]).sum::<f64>();
        let v_after = (v_before - cost) * growth;

        self.weights = (0..=n)
            .map(|i| if i < n { target[i] * (1.0 + returns[i]) / growth } else { target[n] / growth })
            .collect();
        self.value = v_after;
        self.t += 1;
        self.done = self.t + 1 == self.data.n_rows();
        Ok(StepResult {
            obs: self.observation(),
            reward: reward_for(&self.cfg, v_before, v_after),
            done: self.done,
            info: StepInfo { trades: target, costs: cost, risk_triggered, value_before: v_before, value_after: v_after },
        })
    }

    fn action_dim(&self) -> usize {
        self.data.n_tickers() + 1
    }

    fn obs_dim(&self) -> usize {
        let n = self.data.n_tickers();
        2 * n + 1 + n * self.data.n_columns()
    }

    fn is_done(&self) -> bool {
        self.done
    }

    fn value(&self) -> f64 {
        self.value
    }

    fn timestamp(&self) -> DateTime<Utc> {
        self.data.timestamps()[self.t]
    }

    /// Vector layout: drifted weights, prices relative to the first bar,
    /// then the (optionally normalized) panel.
    fn observation(&self) -> Observation {
        let state = self.state();
        let n = self.data.n_tickers();
        let mut v = Vec::with_capacity(self.obs_dim());
        v.extend_from_slice(&state.weights);
        v.extend((0..n).map(|i| state.prices[i] / self.data.close(0, i)));
        for i in 0..n {
            let cell = self.data.cell(self.t, i);
            match &self.normalizer {
                Some(norm) => norm.apply(i, cell, &mut v),
                None => v.extend_from_slice(cell),
            }
        }
        Observation { state: EnvState::Portfolio(state), vector: v }
    }
}
