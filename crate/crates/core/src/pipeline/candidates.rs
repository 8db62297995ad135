use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::agents::{train_agent, Policy, TrainOutcome};
use crate::env::{EnvConfig, Environment, FeatureNormalizer, PortfolioEnv, TradingEnv};
use crate::marketdata::MarketDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Trading,
    Portfolio,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub config: EnvConfig,
}

impl EnvSpec {
    /// Env over `rows` of `data`, starting with `capital`.
    pub fn build(
        &self,
        data: &MarketDataset,
        rows: Range<usize>,
        normalizer: &FeatureNormalizer,
        capital: f64,
    ) -> Result<Box<dyn Environment>, PipelineError> {
        if rows.len() < 2 {
            return Err(PipelineError::InsufficientData(format!("slice {rows:?} has fewer than 2 bars")));
        }
        let slice = Arc::new(data.slice_rows(rows)?);
        let cfg = EnvConfig { initial_capital: capital, ..self.config.clone() };
        Ok(match self.kind {
            EnvKind::Trading => Box::new(TradingEnv::new(slice, cfg)?.with_normalizer(normalizer.clone())?),
            EnvKind::Portfolio => Box::new(PortfolioEnv::new(slice, cfg)?.with_normalizer(normalizer.clone())?),
        })
    }

    pub fn action_dim(&self, n_assets: usize) -> usize {
        match self.kind {
            EnvKind::Trading => n_assets,
            EnvKind::Portfolio => n_assets + 1,
        }
    }

    pub fn obs_dim(&self, n_assets: usize, n_columns: usize) -> usize {
        match self.kind {
            EnvKind::Trading => 1 + 2 * n_assets + n_assets * n_columns,
            EnvKind::Portfolio => 2 * n_assets + 1 + n_assets * n_columns,
        }
    }
}

/// Whether a candidate may win the ensemble or is only reported alongside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    #[default]
    Candidate,
    Baseline,
}

/// What a factory knows about the slice a policy will act on.
#[derive(Debug, Clone)]
pub struct SliceContext {
    /// The full feature panel; the env sees `rows` of it.
    pub data: Arc<MarketDataset>,
    pub rows: Range<usize>,
    pub env_kind: EnvKind,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub seed: u64,
}

impl SliceContext {
    pub fn n_assets(&self) -> usize {
        self.data.n_tickers()
    }
}

/// Builds a fresh policy for a slice.
pub trait CandidateFactory: Send + Sync {
    fn build(&self, ctx: &SliceContext) -> Result<Box<dyn Policy>, PipelineError>;
}

impl<F> CandidateFactory for F
where
    F: Fn(&SliceContext) -> Result<Box<dyn Policy>, PipelineError> + Send + Sync,
{
    fn build(&self, ctx: &SliceContext) -> Result<Box<dyn Policy>, PipelineError> {
        self(ctx)
    }
}

/// A named entry in the ensemble.
#[derive(Clone)]
pub struct Candidate {
    pub name: String,
    pub role: Role,
    pub steps: usize,
    pub factory: Arc<dyn CandidateFactory>,
}

impl std::fmt::Debug for Candidate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Candidate").field("name", &self.name).field("role", &self.role).field("steps", &self.steps).finish()
    }
}

/// Parameters and learning curve of one trained candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedCandidate {
    pub name: String,
    pub seed: u64,
    pub blob: Vec<u8>,
    pub outcome: TrainOutcome,
}

impl Candidate {
    pub fn new(name: impl Into<String>, steps: usize, factory: impl CandidateFactory + 'static) -> Self {
        Candidate { name: name.into(), role: Role::Candidate, steps, factory: Arc::new(factory) }
    }

    pub fn baseline(mut self) -> Self {
        self.role = Role::Baseline;
        self
    }

    /// Builds the policy for `ctx` and trains it on `env` for `steps`.
    pub fn train(&self, ctx: &SliceContext, env: &mut dyn Environment) -> Result<TrainedCandidate, PipelineError> {
        let mut policy = self.factory.build(ctx).map_err(|e| PipelineError::for_candidate(&self.name, e))?;
        let outcome =
            train_agent(&mut *policy, env, self.steps, ctx.seed).map_err(|e| PipelineError::for_candidate(&self.name, e))?;
        Ok(TrainedCandidate { name: self.name.clone(), seed: ctx.seed, blob: policy.save(), outcome })
    }

    /// A frozen copy of the trained policy for another slice.
    pub fn deploy(&self, ctx: &SliceContext, blob: &[u8]) -> Result<Box<dyn Policy>, PipelineError> {
        let mut policy = self.factory.build(ctx).map_err(|e| PipelineError::for_candidate(&self.name, e))?;
        policy.load(blob).map_err(|e| PipelineError::for_candidate(&self.name, e))?;
        Ok(policy)
    }
}
