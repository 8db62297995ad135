use std::sync::Arc;

use chrono::{DateTime, Utc};

use super::{
    estimate_moments_at, mean_variance_optimize, weights_to_scores, OptimizerConfig, StrategyError, WeightVector,
};
use crate::agents::{AgentError, Policy};
use crate::env::{EnvState, Observation};
use crate::marketdata::MarketDataset;

/// Drifted weights of a portfolio-env observation.
fn current_weights(obs: &Observation) -> Vec<f64> {
    match &obs.state {
        EnvState::Portfolio(s) => s.weights.clone(),
        EnvState::Trading(_) => panic!("portfolio strategies need a portfolio environment"),
    }
}

macro_rules! stateless_learning {
    () => {
        fn observe(&mut self, _: &[f64], _: &[f64], _: f64, _: &[f64], _: bool) {}
        fn learn(&mut self) -> Result<Option<f64>, AgentError> {
            Ok(None)
        }
        fn save(&self) -> Vec<u8> {
            Vec::new()
        }
        fn load(&mut self, _blob: &[u8]) -> Result<(), AgentError> {
            Ok(())
        }
        fn reseed(&mut self, _seed: u64) {}
    };
}

/// Buys `allocation` on the first bar, then holds the drifting position.
#[derive(Debug, Clone)]
pub struct PassiveHold {
    allocation: WeightVector,
    started: bool,
}

pub fn passive_hold(allocation: WeightVector) -> PassiveHold {
    PassiveHold { allocation, started: false }
}

impl Policy for PassiveHold {
    fn act(&mut self, obs: &Observation, _explore: bool) -> Vec<f64> {
        if !self.started || obs.state.t() == 0 {
            self.started = true;
            return self.allocation.scores();
        }
        weights_to_scores(&current_weights(obs))
    }
    fn begin_episode(&mut self) {
        self.started = false;
    }
    stateless_learning!();
}

/// `1/N` on every asset, rebalanced every bar.
#[derive(Debug, Clone)]
pub struct EqualWeight {
    n_assets: usize,
}

pub fn equal_weight(n_assets: usize) -> EqualWeight {
    assert!(n_assets >= 1, "equal weight needs at least one asset");
    EqualWeight { n_assets }
}

impl Policy for EqualWeight {
    fn act(&mut self, _obs: &Observation, _explore: bool) -> Vec<f64> {
        WeightVector::equal(self.n_assets).scores()
    }
    stateless_learning!();
}

/// Re-optimizes on trailing moments every `every` bars and holds in between.
///
/// Env bar `t` corresponds to dataset row `offset + t`, so the policy can
/// look back past the start of the environment's slice. Rows after the
/// current bar are never read.
#[derive(Debug, Clone)]
pub struct RebalancingPolicy {
    data: Arc<MarketDataset>,
    offset: usize,
    cfg: OptimizerConfig,
    window: usize,
    every: Option<usize>,
    last_rebalance: Option<usize>,
    history: Vec<(DateTime<Utc>, WeightVector)>,
}

/// `every_k_bars = None` optimizes once and then holds.
pub fn rebalancing_policy(
    data: Arc<MarketDataset>,
    offset: usize,
    cfg: OptimizerConfig,
    window: usize,
    every_k_bars: Option<usize>,
) -> Result<RebalancingPolicy, StrategyError> {
    cfg.validate()?;
    let need = data.n_tickers() + 2;
    if window < need {
        return Err(StrategyError::WindowTooShort { window, need });
    }
    if every_k_bars == Some(0) {
        return Err(StrategyError::InvalidConfig("rebalance period must be positive".into()));
    }
    Ok(RebalancingPolicy { data, offset, cfg, window, every: every_k_bars, last_rebalance: None, history: Vec::new() })
}

impl RebalancingPolicy {
    /// Weights decided at each rebalance, stamped with the decision bar.
    pub fn history(&self) -> &[(DateTime<Utc>, WeightVector)] {
        &self.history
    }

    /// Optimized weights at dataset row `row`, using rows up to `row` only.
    /// Falls back to the available history when fewer than `window` bars
    /// precede `row`, and to equal weights when even that is too short.
    pub fn weights_at(&self, row: usize) -> Result<WeightVector, StrategyError> {
        let n = self.data.n_tickers();
        let window = self.window.min(row + 1);
        if window < n + 2 {
            return Ok(WeightVector::equal(n));
        }
        let m = estimate_moments_at(&self.data, row, window, self.cfg.ridge)?;
        Ok(mean_variance_optimize(&m, &self.cfg)?.weights)
    }

    fn due(&self, t: usize) -> bool {
        match (self.last_rebalance, self.every) {
            (None, _) => true,
            (Some(last), _) if t < last => true,
            (Some(_), None) => false,
            (Some(last), Some(k)) => t - last >= k,
        }
    }
}

impl Policy for RebalancingPolicy {
    fn act(&mut self, obs: &Observation, _explore: bool) -> Vec<f64> {
        let t = obs.state.t();
        if !self.due(t) {
            return weights_to_scores(&current_weights(obs));
        }
        let row = self.offset + t;
        let w = self.weights_at(row).expect("trailing window validated at construction");
        self.last_rebalance = Some(t);
        self.history.push((self.data.timestamps()[row], w.clone()));
        w.scores()
    }
    fn begin_episode(&mut self) {
        self.last_rebalance = None;
        self.history.clear();
    }
    stateless_learning!();
}
