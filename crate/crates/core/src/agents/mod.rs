//! Learning agents behind one plug-and-play [`Policy`] contract.

mod a2c;
mod blob;
mod dqn;
mod mlp;
mod replay;
mod simple;
mod train;

pub use a2c::{returns_to_go, A2cAgent, A2cConfig};
pub use blob::{decode_mlp_into, encode_mlp};
pub use dqn::{DqnAgent, DqnConfig};
pub use mlp::{Activation, Gradients, Layer, Mlp};
pub use replay::ReplayBuffer;
pub use simple::{ConstantPolicy, RandomPolicy};
pub use train::{train_agent, train_agent_vec, TrainOutcome};

use thiserror::Error;

use crate::env::{EnvError, Observation};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("backward called without a cached forward pass")]
    NoCachedForward,
    #[error("replay buffer holds {have} transitions, batch needs {need}")]
    BufferTooSmall { have: usize, need: usize },
    #[error("empty rollout")]
    EmptyRollout,
    #[error("bad parameter blob: {0}")]
    BadBlob(String),
    #[error("invalid agent configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// What the agent chose, in the agent's own action space.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// One index per output head.
    Discrete(Vec<usize>),
    /// Pre-squash continuous sample.
    Continuous(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// How agent outputs map to environment actions.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionSpace {
    /// `n` discrete actions; the env receives `[index]`.
    Discrete(usize),
    /// Per-asset levels (e.g. `{-1, 0, 1}`) combined over `n_assets`; the
    /// env receives one level per asset.
    Grid { n_assets: usize, levels: Vec<f64> },
    /// Real vector of length `dim` in `[-1, 1]`.
    Continuous(usize),
}

impl ActionSpace {
    pub fn env_dim(&self) -> usize {
        match self {
            ActionSpace::Discrete(_) => 1,
            ActionSpace::Grid { n_assets, .. } => *n_assets,
            ActionSpace::Continuous(d) => *d,
        }
    }

    /// Output-head sizes for a discrete agent. Grids over at most three
    /// assets use one head over the Cartesian product; larger grids use one
    /// head per asset.
    pub fn heads(&self) -> Vec<usize> {
        match self {
            ActionSpace::Discrete(n) => vec![*n],
            ActionSpace::Grid { n_assets, levels } if *n_assets <= 3 => vec![levels.len().pow(*n_assets as u32)],
            ActionSpace::Grid { n_assets, levels } => vec![levels.len(); *n_assets],
            ActionSpace::Continuous(d) => vec![*d],
        }
    }

    /// Env action for head choices.
    pub fn decode(&self, choice: &[usize]) -> Vec<f64> {
        match self {
            ActionSpace::Discrete(_) => vec![choice[0] as f64],
            ActionSpace::Grid { n_assets, levels } if *n_assets <= 3 => {
                let l = levels.len();
                let mut idx = choice[0];
                (0..*n_assets)
                    .map(|_| {
                        let v = levels[idx % l];
                        idx /= l;
                        v
                    })
                    .collect()
            }
            ActionSpace::Grid { levels, .. } => choice.iter().map(|c| levels[*c]).collect(),
            ActionSpace::Continuous(_) => panic!("continuous spaces have no discrete decoding"),
        }
    }

    /// Inverse of [`ActionSpace::decode`]; values snap to the nearest level.
    pub fn encode(&self, action: &[f64]) -> Vec<usize> {
        let nearest = |levels: &[f64], v: f64| {
            let mut best = 0;
            for (i, l) in levels.iter().enumerate() {
                if (l - v).abs() < (levels[best] - v).abs() {
                    best = i;
                }
            }
            best
        };
        match self {
            ActionSpace::Discrete(n) => vec![(action[0].round().max(0.0) as usize).min(n - 1)],
            ActionSpace::Grid { n_assets, levels } if *n_assets <= 3 => {
                let l = levels.len();
                let idx = action.iter().rev().fold(0, |acc, v| acc * l + nearest(levels, *v));
                vec![idx]
            }
            ActionSpace::Grid { levels, .. } => action.iter().map(|v| nearest(levels, *v)).collect(),
            ActionSpace::Continuous(_) => panic!("continuous spaces have no discrete encoding"),
        }
    }
}

/// The agent contract. Anything implementing it can be trained, backtested
/// and entered into an ensemble.
pub trait Policy: Send {
    /// Env action for `obs`. With `explore == false` the result depends only
    /// on the parameters.
    fn act(&mut self, obs: &Observation, explore: bool) -> Vec<f64>;

    fn observe(&mut self, state: &[f64], action: &[f64], reward: f64, next_state: &[f64], done: bool);

    /// One learning update if the agent is ready for one; returns its loss.
    fn learn(&mut self) -> Result<Option<f64>, AgentError>;

    fn save(&self) -> Vec<u8>;

    fn load(&mut self, blob: &[u8]) -> Result<(), AgentError>;

    /// Re-keys the exploration stream.
    fn reseed(&mut self, seed: u64);

    /// Called at the start of every episode.
    fn begin_episode(&mut self) {}
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn act(&mut self, obs: &Observation, explore: bool) -> Vec<f64> {
        (**self).act(obs, explore)
    }
    fn observe(&mut self, state: &[f64], action: &[f64], reward: f64, next_state: &[f64], done: bool) {
        (**self).observe(state, action, reward, next_state, done)
    }
    fn learn(&mut self) -> Result<Option<f64>, AgentError> {
        (**self).learn()
    }
    fn save(&self) -> Vec<u8> {
        (**self).save()
    }
    fn load(&mut self, blob: &[u8]) -> Result<(), AgentError> {
        (**self).load(blob)
    }
    fn reseed(&mut self, seed: u64) {
        (**self).reseed(seed)
    }
    fn begin_episode(&mut self) {
        (**self).begin_episode()
    }
}
