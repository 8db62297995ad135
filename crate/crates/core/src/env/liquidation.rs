use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::seed::stream_rng;

/// Almgren-Chriss execution parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiquidationConfig {
    /// Shares to liquidate, split evenly across agents.
    pub total_shares: f64,
    pub n_periods: usize,
    /// Period length in the time unit of `volatility`.
    pub period_length: f64,
    pub initial_price: f64,
    pub volatility: f64,
    pub permanent_impact: f64,
    pub temporary_impact: f64,
    pub fixed_cost: f64,
    pub risk_aversion: f64,
    pub n_agents: usize,
}

impl LiquidationConfig {
    /// True when `eta / tau <= gamma * tau / 2`, where the expected cost is
    /// no longer convex in the schedule.
    pub fn is_non_convex(&self) -> bool {
        self.temporary_impact / self.period_length <= self.permanent_impact * self.period_length / 2.0
    }

    fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::InvalidConfig(m.to_string()));
        if !(self.total_shares > 0.0) || self.n_periods == 0 || !(self.period_length > 0.0) || !(self.initial_price > 0.0) {
            return bad("shares, periods, period length and initial price must be positive");
        }
        if [self.volatility, self.permanent_impact, self.temporary_impact, self.fixed_cost, self.risk_aversion]
            .iter()
            .any(|v| !(*v >= 0.0))
        {
            return bad("volatility, impacts, fixed cost and risk aversion must be non-negative");
        }
        if !(1..=2).contains(&self.n_agents) {
            return bad("n_agents must be 1 or 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiquidationState {
    pub remaining: Vec<f64>,
    pub price: f64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiquidationStep {
    pub state: LiquidationState,
    /// Per-agent reward: negative incremental shortfall minus risk penalty.
    pub rewards: Vec<f64>,
    pub sold: Vec<f64>,
    pub execution_price: f64,
    pub done: bool,
    pub non_convex: bool,
}

/// Multi-agent liquidation of one stock under linear price impact.
#[derive(Debug, Clone)]
pub struct LiquidationEnv {
    cfg: LiquidationConfig,
    rng: ChaCha8Rng,
    remaining: Vec<f64>,
    captured: Vec<f64>,
    price: f64,
    k: usize,
}

impl LiquidationEnv {
    pub fn new(cfg: LiquidationConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        let per_agent = cfg.total_shares / cfg.n_agents as f64;
        Ok(LiquidationEnv {
            rng: stream_rng(0, 0),
            remaining: vec![per_agent; cfg.n_agents],
            captured: vec![0.0; cfg.n_agents],
            price: cfg.initial_price,
            k: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &LiquidationConfig {
        &self.cfg
    }

    pub fn reset(&mut self, seed: u64) -> LiquidationState {
        let per_agent = self.cfg.total_shares / self.cfg.n_agents as f64;
        self.rng = stream_rng(seed, 0);
        self.remaining = vec![per_agent; self.cfg.n_agents];
        self.captured = vec![0.0; self.cfg.n_agents];
        self.price = self.cfg.initial_price;
        self.k = 0;
        self.state()
    }

    pub fn state(&self) -> LiquidationState {
        LiquidationState { remaining: self.remaining.clone(), price: self.price, k: self.k }
    }

    /// Cash captured so far, per agent.
    pub fn captured(&self) -> &[f64] {
        &self.captured
    }

    /// Implementation shortfall `X * P0 - capture` so far (all agents).
    pub fn shortfall(&self) -> f64 {
        let sold: f64 = self.cfg.total_shares - self.remaining.iter().sum::<f64>();
        sold * self.cfg.initial_price - self.captured.iter().sum::<f64>()
    }

    pub fn is_done(&self) -> bool {
        self.k >= self.cfg.n_periods
    }

    /// Each agent sells `fraction * remaining`; everything left is sold in
    /// the final period.
    pub fn step(&mut self, fractions: &[f64]) -> Result<LiquidationStep, EnvError> {
        if self.is_done() {
            return Err(EnvError::EpisodeFinished);
        }
        if fractions.len() != self.cfg.n_agents {
            return Err(EnvError::ShapeMismatch { expected: self.cfg.n_agents, got: fractions.len() });
        }
        if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(EnvError::FractionOutOfRange(*f));
        }
        let last = self.k + 1 == self.cfg.n_periods;
        let sold: Vec<f64> = fractions
            .iter()
            .zip(&self.remaining)
            .map(|(f, r)| if last { *r } else { f * r })
            .collect();
        let total: f64 = sold.iter().sum();
        let tau = self.cfg.period_length;
        let xi: f64 = self.rng.sample(StandardNormal);

        let prev = self.price;
        let sign = if total > 0.0 { 1.0 } else { 0.0 };
        let execution_price = prev - self.cfg.fixed_cost * sign - (self.cfg.temporary_impact / tau) * total;
        self.price = prev + self.cfg.volatility * tau.sqrt() * xi - tau * self.cfg.permanent_impact * (total / tau);

        let step_vol = self.cfg.volatility * tau.sqrt();
        let mut rewards = Vec::with_capacity(sold.len());
        for j in 0..sold.len() {
            self.remaining[j] = if last { 0.0 } else { self.remaining[j] - sold[j] };
            self.captured[j] += sold[j] * execution_price;
            let mut r = sold[j] * execution_price - sold[j] * self.cfg.initial_price;
            if self.cfg.risk_aversion > 0.0 {
                r -= self.cfg.risk_aversion * (self.remaining[j] * step_vol).powi(2);
            }
            rewards.push(r);
        }
        self.k += 1;
        Ok(LiquidationStep {
            state: self.state(),
            rewards,
            sold,
            execution_price,
            done: self.is_done(),
            non_convex: self.cfg.is_non_convex(),
        })
    }
}
