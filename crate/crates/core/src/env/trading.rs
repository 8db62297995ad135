use std::sync::Arc;

use chrono::{DateTime, Utc};

use super::{reward_for, EnvConfig, EnvError, EnvState, Environment, FeatureNormalizer, Observation, StepInfo, StepResult};
use crate::marketdata::MarketDataset;

#[derive(Debug, Clone, PartialEq)]
pub struct TradingState {
    pub balance: f64,
    pub shares: Vec<i64>,
    /// Close of the current bar.
    pub prices: Vec<f64>,
    /// Every panel column of every ticker at the current bar, ticker-major.
    pub features: Vec<f64>,
    pub t: usize,
}

impl TradingState {
    pub fn value(&self) -> f64 {
        self.balance + self.shares.iter().zip(&self.prices).map(|(h, p)| *h as f64 * p).sum::<f64>()
    }
}

/// Multi-asset stock trading with integer holdings.
///
/// Actions are per-asset fractions of `hmax` shares in `[-1, 1]`. Trades
/// execute at the current close: sells first, then buys in ascending asset
/// order, each clipped to holdings or cash unless shorting or margin is
/// allowed.
#[derive(Debug, Clone)]
pub struct TradingEnv {
    data: Arc<MarketDataset>,
    cfg: EnvConfig,
    normalizer: Option<FeatureNormalizer>,
    risk_col: Option<usize>,
    t: usize,
    balance: f64,
    shares: Vec<i64>,
    done: bool,
}

impl TradingEnv {
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
        Ok(TradingEnv {
            balance: cfg.initial_capital,
            data,
            cfg,
            normalizer: None,
            risk_col,
            t: 0,
            shares: vec![0; n],
            done: false,
        })
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

    /// Starting capital for the next reset.
    pub fn set_initial_capital(&mut self, capital: f64) {
        self.cfg.initial_capital = capital;
    }

    pub fn state(&self) -> TradingState {
        TradingState {
            balance: self.balance,
            shares: self.shares.clone(),
            prices: self.data.closes_at(self.t),
            features: self.data.row(self.t).to_vec(),
            t: self.t,
        }
    }

    fn value_at(&self, t: usize) -> f64 {
        self.balance + self.shares.iter().enumerate().map(|(i, h)| *h as f64 * self.data.close(t, i)).sum::<f64>()
    }

    pub fn risk_value(&self, t: usize) -> Option<f64> {
        self.risk_col.map(|c| self.data.get(t, 0, c))
    }
}

impl Environment for TradingEnv {
    fn reset(&mut self, _seed: u64) -> Observation {
        self.t = 0;
        self.balance = self.cfg.initial_capital;
        self.shares.iter_mut().for_each(|h| *h = 0);
        self.done = false;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        let n = self.data.n_tickers();
        if action.len() != n {
            return Err(EnvError::ShapeMismatch { expected: n, got: action.len() });
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(EnvError::NonFiniteAction);
        }
        let t = self.t;
        let v_before = self.value_at(t);
        let hmax = self.cfg.hmax as f64;
        let mut desired: Vec<i64> = action.iter().map(|a| (a.clamp(-1.0, 1.0) * hmax).round() as i64).collect();

        let risk_triggered = self.risk_value(t).is_some_and(|r| r > self.cfg.risk_threshold);
        if risk_triggered {
            desired = self.shares.iter().map(|h| -h).collect();
        }

        let c = self.cfg.cost_rate;
        let mut executed = vec![0i64; n];
        let mut costs = 0.0;
        for i in 0..n {
            if desired[i] >= 0 {
                continue;
            }
            let mut q = -desired[i];
            if !self.cfg.allow_short {
                q = q.min(self.shares[i].max(0));
            }
            if q == 0 {
                continue;
            }
            let notional = q as f64 * self.data.close(t, i);
            let fee = notional * c;
            self.balance += notional - fee;
            costs += fee;
            self.shares[i] -= q;
            executed[i] = -q;
        }
        for i in 0..n {
            if desired[i] <= 0 {
                continue;
            }
            let p = self.data.close(t, i);
            let unit = p * (1.0 + c);
            let mut q = desired[i];
            if !self.cfg.allow_margin {
                let affordable = (self.balance.max(0.0) / unit).floor() as i64;
                q = q.min(affordable);
                while q > 0 && q as f64 * p + q as f64 * p * c > self.balance {
                    q -= 1;
                }
            }
            if q == 0 {
                continue;
            }
            let notional = q as f64 * p;
            let fee = notional * c;
            self.balance -= notional + fee;
            costs += fee;
            self.shares[i] += q;
            executed[i] = q;
        }

        self.t += 1;
        let v_after = self.value_at(self.t);
        self.done = self.t + 1 == self.data.n_rows();
        Ok(StepResult {
            obs: self.observation(),
            reward: reward_for(&self.cfg, v_before, v_after),
            done: self.done,
            info: StepInfo {
                trades: executed.iter().map(|q| *q as f64).collect(),
                costs,
                risk_triggered,
                value_before: v_before,
                value_after: v_after,
            },
        })
    }

    fn action_dim(&self) -> usize {
        self.data.n_tickers()
    }

    fn obs_dim(&self) -> usize {
        let n = self.data.n_tickers();
        1 + 2 * n + n * self.data.n_columns()
    }

    fn is_done(&self) -> bool {
        self.done
    }

    fn value(&self) -> f64 {
        self.value_at(self.t)
    }

    fn timestamp(&self) -> DateTime<Utc> {
        self.data.timestamps()[self.t]
    }

    /// Vector layout: `b / v0`, position values `h_i p_i / v0`, prices
    /// relative to the first bar, then the (optionally normalized) panel.
    fn observation(&self) -> Observation {
        let state = self.state();
        let v0 = self.cfg.initial_capital;
        let n = self.data.n_tickers();
        let mut v = Vec::with_capacity(self.obs_dim());
        v.push(state.balance / v0);
        v.extend((0..n).map(|i| state.shares[i] as f64 * state.prices[i] / v0));
        v.extend((0..n).map(|i| state.prices[i] / self.data.close(0, i)));
        for i in 0..n {
            let cell = self.data.cell(self.t, i);
            match &self.normalizer {
                Some(norm) => norm.apply(i, cell, &mut v),
                None => v.extend_from_slice(cell),
            }
        }
        Observation { state: EnvState::Trading(state), vector: v }
    }
}
