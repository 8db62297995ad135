use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::blob::{decode_mlp_into, encode_mlp};
use super::{Action, ActionSpace, Activation, AgentError, Gradients, Mlp, Policy, ReplayBuffer, Transition};
use crate::env::Observation;
use crate::seed::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    /// Per-asset action levels, as fractions of `hmax`.
    pub action_levels: Vec<f64>,
    pub gamma: f64,
    pub lr: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: usize,
    /// Hard target sync period, in learn calls.
    pub target_sync_every: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub grad_clip: f64,
    /// Environment steps between learning updates.
    pub train_every: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            action_levels: vec![-1.0, 0.0, 1.0],
            gamma: 0.99,
            lr: 1e-3,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 5_000,
            target_sync_every: 250,
            batch_size: 32,
            buffer_capacity: 50_000,
            hidden: vec![64, 64],
            activation: Activation::Relu,
            grad_clip: 10.0,
            train_every: 1,
        }
    }
}

impl DqnConfig {
    fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::InvalidConfig(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if ![self.epsilon_start, self.epsilon_end].iter().all(|e| (0.0..=1.0).contains(e)) {
            return bad("epsilon must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.target_sync_every == 0 || self.buffer_capacity == 0 || self.train_every == 0 {
            return bad("batch size, sync period, capacity and train_every must be positive");
        }
        Ok(())
    }
}

/// Deep Q-learning with uniform replay and a hard-synced target network.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    cfg: DqnConfig,
    space: ActionSpace,
    heads: Vec<usize>,
    online: Mlp,
    target: Mlp,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    explore_steps: usize,
    observed: usize,
    learn_calls: usize,
}

impl DqnAgent {
    pub fn new(obs_dim: usize, space: ActionSpace, cfg: DqnConfig, seed: u64) -> Result<Self, AgentError> {
        cfg.validate()?;
        if matches!(space, ActionSpace::Continuous(_)) {
            return Err(AgentError::InvalidConfig("DQN needs a discrete action space".into()));
        }
        let heads = space.heads();
        let mut sizes = vec![obs_dim];
        sizes.extend(&cfg.hidden);
        sizes.push(heads.iter().sum());
        let mut init_rng = stream_rng(seed, 1);
        let online = Mlp::new(&sizes, cfg.activation, &mut init_rng)?;
        Ok(DqnAgent {
            target: online.clone(),
            online,
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            rng: stream_rng(seed, 0),
            cfg,
            space,
            heads,
            explore_steps: 0,
            observed: 0,
            learn_calls: 0,
        })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.cfg
    }

    pub fn network(&self) -> &Mlp {
        &self.online
    }

    pub fn network_mut(&mut self) -> &mut Mlp {
        &mut self.online
    }

    /// Copies the online network into the target network.
    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn push(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>, AgentError> {
        self.online.predict(state)
    }

    /// Current epsilon of the linear decay schedule.
    pub fn epsilon(&self) -> f64 {
        let frac = (self.explore_steps as f64 / self.cfg.epsilon_decay_steps.max(1) as f64).min(1.0);
        self.cfg.epsilon_start + (self.cfg.epsilon_end - self.cfg.epsilon_start) * frac
    }

    /// Per-head choice: uniform with probability `epsilon`, otherwise the
    /// greedy index with the lowest-index tie-break.
    pub fn select(&mut self, state: &[f64], epsilon: f64) -> Result<Vec<usize>, AgentError> {
        if epsilon > 0.0 && self.rng.random::<f64>() < epsilon {
            return Ok(self.heads.iter().map(|h| self.rng.random_range(0..*h)).collect());
        }
        let q = self.online.predict(state)?;
        Ok(greedy(&q, &self.heads))
    }

    /// Single-head epsilon-greedy selection.
    pub fn act_epsilon_greedy(&mut self, state: &[f64], epsilon: f64) -> Result<usize, AgentError> {
        Ok(self.select(state, epsilon)?[0])
    }

    /// One SGD step on the mean squared TD error of a uniformly sampled batch.
    pub fn learn_batch(&mut self) -> Result<f64, AgentError> {
        let need = self.cfg.batch_size;
        if self.buffer.len() < need {
            return Err(AgentError::BufferTooSmall { have: self.buffer.len(), need });
        }
        let batch: Vec<Transition> = self.buffer.sample(need, &mut self.rng).into_iter().cloned().collect();
        let n_heads = self.heads.len();
        let scale = 1.0 / (batch.len() * n_heads) as f64;
        let mut total = Gradients::zeros_like(&self.online);
        let mut loss = 0.0;
        for tr in &batch {
            let choice = match &tr.action {
                Action::Discrete(c) if c.len() == n_heads => c,
                _ => return Err(AgentError::InvalidConfig("DQN transition needs one index per head".into())),
            };
            let next_q = if tr.done { None } else { Some(self.target.predict(&tr.next_state)?) };
            let q = self.online.forward(&tr.state)?;
            let mut upstream = vec![0.0; q.len()];
            let mut offset = 0;
            for (h, size) in self.heads.iter().enumerate() {
                let bootstrap = next_q
                    .as_ref()
                    .map(|nq| nq[offset..offset + size].iter().copied().fold(f64::NEG_INFINITY, f64::max))
                    .unwrap_or(0.0);
                let y = tr.reward + self.cfg.gamma * bootstrap;
                let err = q[offset + choice[h]] - y;
                loss += err * err * scale;
                upstream[offset + choice[h]] = 2.0 * err * scale;
                offset += size;
            }
            total.add_assign(&self.online.backward(&upstream)?);
        }
        total.clip_norm(self.cfg.grad_clip);
        self.online.sgd_step(&total, self.cfg.lr);
        self.learn_calls += 1;
        if self.learn_calls % self.cfg.target_sync_every == 0 {
            self.sync_target();
        }
        Ok(loss)
    }
}

pub(crate) fn greedy(q: &[f64], heads: &[usize]) -> Vec<usize> {
    let mut offset = 0;
    heads
        .iter()
        .map(|size| {
            let slice = &q[offset..offset + size];
            offset += size;
            let mut best = 0;
            for (i, v) in slice.iter().enumerate() {
                if *v > slice[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

impl Policy for DqnAgent {
    fn act(&mut self, obs: &Observation, explore: bool) -> Vec<f64> {
        let eps = if explore {
            let e = self.epsilon();
            self.explore_steps += 1;
            e
        } else {
            0.0
        };
        let choice = self.select(&obs.vector, eps).expect("observation matches network input");
        self.space.decode(&choice)
    }

    fn observe(&mut self, state: &[f64], action: &[f64], reward: f64, next_state: &[f64], done: bool) {
        self.observed += 1;
        self.buffer.push(Transition {
            state: state.to_vec(),
            action: Action::Discrete(self.space.encode(action)),
            reward,
            next_state: next_state.to_vec(),
            done,
        });
    }

    fn learn(&mut self) -> Result<Option<f64>, AgentError> {
        if self.buffer.len() < self.cfg.batch_size || self.observed % self.cfg.train_every != 0 {
            return Ok(None);
        }
        self.learn_batch().map(Some)
    }

    fn save(&self) -> Vec<u8> {
        let mut out = Vec::new();
        encode_mlp(&self.online, &mut out);
        out
    }

    fn load(&mut self, blob: &[u8]) -> Result<(), AgentError> {
        decode_mlp_into(blob, &mut self.online)?;
        self.sync_target();
        Ok(())
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = stream_rng(seed, 0);
    }
}
