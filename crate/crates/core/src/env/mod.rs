//! Gym-style market environments.
//!
//! [`TradingEnv`] trades integer share counts, [`PortfolioEnv`] allocates
//! weights through a softmax, and [`LiquidationEnv`] simulates
//! Almgren-Chriss execution. [`VecEnv`] steps many instances in parallel.

mod config;
mod liquidation;
mod normalizer;
mod portfolio;
mod trading;
mod trajectory;
mod vec_env;

pub use config::{EnvConfig, RewardKind, RiskIndicator};
pub use liquidation::{LiquidationConfig, LiquidationEnv, LiquidationState, LiquidationStep};
pub use normalizer::FeatureNormalizer;
pub use portfolio::{softmax, PortfolioEnv, PortfolioState};
pub use trading::{TradingEnv, TradingState};
pub use trajectory::{write_trajectory_csv, TrajectoryRow};
pub use vec_env::{AutoReset, SlotStep, VecEnv, VecStep};

use chrono::{DateTime, Utc};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("episode finished; call reset")]
    EpisodeFinished,
    #[error("action contains non-finite values")]
    NonFiniteAction,
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("liquidation fraction {0} outside [0, 1]")]
    FractionOutOfRange(f64),
    #[error("invalid environment configuration: {0}")]
    InvalidConfig(String),
}

/// Agent-visible state of either market environment.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvState {
    Trading(TradingState),
    Portfolio(PortfolioState),
}

impl EnvState {
    pub fn t(&self) -> usize {
        match self {
            EnvState::Trading(s) => s.t,
            EnvState::Portfolio(s) => s.t,
        }
    }

    pub fn prices(&self) -> &[f64] {
        match self {
            EnvState::Trading(s) => &s.prices,
            EnvState::Portfolio(s) => &s.prices,
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            EnvState::Trading(s) => s.value(),
            EnvState::Portfolio(s) => s.value,
        }
    }
}

/// State plus the flat numeric vector fed to learning agents.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub state: EnvState,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepInfo {
    /// Executed share deltas (trading) or target weights (portfolio).
    pub trades: Vec<f64>,
    pub costs: f64,
    pub risk_triggered: bool,
    pub value_before: f64,
    pub value_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// The reset/step contract shared by the market environments.
pub trait Environment: Send {
    fn reset(&mut self, seed: u64) -> Observation;
    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError>;
    fn action_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn is_done(&self) -> bool;
    fn value(&self) -> f64;
    fn timestamp(&self) -> DateTime<Utc>;
    fn observation(&self) -> Observation;
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn reset(&mut self, seed: u64) -> Observation {
        (**self).reset(seed)
    }
    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        (**self).step(action)
    }
    fn action_dim(&self) -> usize {
        (**self).action_dim()
    }
    fn obs_dim(&self) -> usize {
        (**self).obs_dim()
    }
    fn is_done(&self) -> bool {
        (**self).is_done()
    }
    fn value(&self) -> f64 {
        (**self).value()
    }
    fn timestamp(&self) -> DateTime<Utc> {
        (**self).timestamp()
    }
    fn observation(&self) -> Observation {
        (**self).observation()
    }
}

pub(crate) fn reward_for(cfg: &EnvConfig, v_before: f64, v_after: f64) -> f64 {
    match cfg.reward_kind {
        RewardKind::DeltaValue => (v_after - v_before) * cfg.reward_scale,
        RewardKind::LogReturn => (v_after / v_before).ln(),
    }
}
