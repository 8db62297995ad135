use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::blob::{encode_mlp, BlobReader};
use super::dqn::greedy;
use super::{Action, ActionSpace, Activation, AgentError, Mlp, Policy, Transition};
use crate::env::Observation;
use crate::seed::stream_rng;

const LOG_STD_MIN: f64 = -5.0;
const LOG_STD_MAX: f64 = 2.0;
const ATANH_CLAMP: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct A2cConfig {
    pub gamma: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub entropy_coef: f64,
    /// Rollout length between updates; episodes ending earlier flush sooner.
    pub n_steps: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub init_log_std: f64,
    pub grad_clip: f64,
    /// Per-asset levels when the agent drives a discrete grid.
    pub action_levels: Vec<f64>,
}

impl Default for A2cConfig {
    fn default() -> Self {
        A2cConfig {
            gamma: 0.99,
            lr_actor: 1e-3,
            lr_critic: 1e-3,
            entropy_coef: 0.01,
            n_steps: 5,
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            init_log_std: -0.5,
            grad_clip: 10.0,
            action_levels: vec![-1.0, 0.0, 1.0],
        }
    }
}

impl A2cConfig {
    fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::InvalidConfig(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.lr_actor > 0.0 && self.lr_critic > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.n_steps == 0 {
            return bad("n_steps must be positive");
        }
        if !(self.entropy_coef >= 0.0) {
            return bad("entropy_coef must be non-negative");
        }
        Ok(())
    }
}

/// Discounted returns within one segment, restarting after each `done`.
pub fn returns_to_go(rewards: &[f64], dones: &[bool], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for i in (0..rewards.len()).rev() {
        if dones.get(i).copied().unwrap_or(false) {
            acc = 0.0;
        }
        acc = rewards[i] + gamma * acc;
        out[i] = acc;
    }
    out
}

/// Advantage actor-critic with a categorical head per discrete action head
/// or a tanh-squashed Gaussian with state-independent log-std.
#[derive(Debug, Clone)]
pub struct A2cAgent {
    cfg: A2cConfig,
    space: ActionSpace,
    heads: Vec<usize>,
    actor: Mlp,
    critic: Mlp,
    log_std: Vec<f64>,
    rng: ChaCha8Rng,
    rollout: Vec<Transition>,
    last_raw: Option<Vec<f64>>,
}

fn softmax_slice(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl A2cAgent {
    pub fn new(obs_dim: usize, space: ActionSpace, cfg: A2cConfig, seed: u64) -> Result<Self, AgentError> {
        cfg.validate()?;
        let heads = space.heads();
        let out: usize = heads.iter().sum();
        let mut actor_sizes = vec![obs_dim];
        actor_sizes.extend(&cfg.hidden);
        let mut critic_sizes = actor_sizes.clone();
        actor_sizes.push(out);
        critic_sizes.push(1);
        let mut init_rng = stream_rng(seed, 1);
        let actor = Mlp::new(&actor_sizes, cfg.activation, &mut init_rng)?;
        let critic = Mlp::new(&critic_sizes, cfg.activation, &mut init_rng)?;
        let log_std = match space {
            ActionSpace::Continuous(d) => vec![cfg.init_log_std; d],
            _ => Vec::new(),
        };
        Ok(A2cAgent {
            cfg,
            space,
            heads,
            actor,
            critic,
            log_std,
            rng: stream_rng(seed, 0),
            rollout: Vec::new(),
            last_raw: None,
        })
    }

    pub fn config(&self) -> &A2cConfig {
        &self.cfg
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    fn is_continuous(&self) -> bool {
        matches!(self.space, ActionSpace::Continuous(_))
    }

    /// Action probabilities per head (discrete spaces only).
    pub fn probabilities(&self, state: &[f64]) -> Result<Vec<Vec<f64>>, AgentError> {
        let z = self.actor.predict(state)?;
        let mut offset = 0;
        Ok(self
            .heads
            .iter()
            .map(|h| {
                let p = softmax_slice(&z[offset..offset + h]);
                offset += h;
                p
            })
            .collect())
    }

    pub fn value(&self, state: &[f64]) -> Result<f64, AgentError> {
        Ok(self.critic.predict(state)?[0])
    }

    /// Samples (or picks the mode of) the policy; returns the agent-side action.
    pub fn sample(&mut self, state: &[f64], explore: bool) -> Result<Action, AgentError> {
        let z = self.actor.predict(state)?;
        if self.is_continuous() {
            let u = z
                .iter()
                .zip(&self.log_std)
                .map(|(m, s)| {
                    if explore {
                        let e: f64 = self.rng.sample(StandardNormal);
                        m + s.exp() * e
                    } else {
                        *m
                    }
                })
                .collect();
            return Ok(Action::Continuous(u));
        }
        if !explore {
            return Ok(Action::Discrete(greedy(&z, &self.heads)));
        }
        let mut offset = 0;
        let mut choice = Vec::with_capacity(self.heads.len());
        for h in &self.heads {
            let p = softmax_slice(&z[offset..offset + h]);
            offset += h;
            let r: f64 = self.rng.random();
            let mut acc = 0.0;
            let mut pick = h - 1;
            for (i, pi) in p.iter().enumerate() {
                acc += pi;
                if r < acc {
                    pick = i;
                    break;
                }
            }
            choice.push(pick);
        }
        Ok(Action::Discrete(choice))
    }

    fn to_env(&self, action: &Action) -> Vec<f64> {
        match action {
            Action::Continuous(u) => u.iter().map(|v| v.tanh()).collect(),
            Action::Discrete(c) => self.space.decode(c),
        }
    }

    /// One actor and one critic gradient step on an on-policy segment.
    pub fn learn_rollout(&mut self, rollout: &[Transition]) -> Result<(f64, f64), AgentError> {
        if rollout.is_empty() {
            return Err(AgentError::EmptyRollout);
        }
        let rewards: Vec<f64> = rollout.iter().map(|t| t.reward).collect();
        let dones: Vec<bool> = rollout.iter().map(|t| t.done).collect();
        let g = returns_to_go(&rewards, &dones, self.cfg.gamma);
        let n = rollout.len() as f64;
        let beta = self.cfg.entropy_coef;

        let mut actor_grad = super::Gradients::zeros_like(&self.actor);
        let mut critic_grad = super::Gradients::zeros_like(&self.critic);
        let mut log_std_grad = vec![0.0; self.log_std.len()];
        let (mut policy_loss, mut value_loss) = (0.0, 0.0);

        for (tr, g_t) in rollout.iter().zip(&g) {
            let v = self.critic.forward(&tr.state)?[0];
            let adv = g_t - v;
            value_loss += (v - g_t).powi(2) / n;
            critic_grad.add_assign(&self.critic.backward(&[2.0 * (v - g_t) / n])?);

            let z = self.actor.forward(&tr.state)?;
            let mut upstream = vec![0.0; z.len()];
            match &tr.action {
                Action::Continuous(u) => {
                    if u.len() != z.len() {
                        return Err(AgentError::ShapeMismatch { expected: z.len(), got: u.len() });
                    }
                    for i in 0..z.len() {
                        let s = self.log_std[i];
                        let var = (2.0 * s).exp();
                        let d = u[i] - z[i];
                        let logp = -d * d / (2.0 * var) - s - 0.5 * (2.0 * std::f64::consts::PI).ln();
                        let entropy = s + 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
                        policy_loss += -(adv * logp + beta * entropy) / n;
                        upstream[i] = -adv * d / var / n;
                        log_std_grad[i] += -(adv * (d * d / var - 1.0) + beta) / n;
                    }
                }
                Action::Discrete(choice) => {
                    if choice.len() != self.heads.len() {
                        return Err(AgentError::ShapeMismatch { expected: self.heads.len(), got: choice.len() });
                    }
                    let mut offset = 0;
                    for (h, size) in self.heads.iter().enumerate() {
                        let p = softmax_slice(&z[offset..offset + size]);
                        let entropy: f64 = -p.iter().filter(|x| **x > 0.0).map(|x| x * x.ln()).sum::<f64>();
                        let logp = p[choice[h]].max(f64::MIN_POSITIVE).ln();
                        policy_loss += -(adv * logp + beta * entropy) / n;
                        for i in 0..*size {
                            let onehot = if i == choice[h] { 1.0 } else { 0.0 };
                            let dlogp = onehot - p[i];
                            let dh = if p[i] > 0.0 { -p[i] * (p[i].ln() + entropy) } else { 0.0 };
                            upstream[offset + i] = -(adv * dlogp + beta * dh) / n;
                        }
                        offset += size;
                    }
                }
            }
            actor_grad.add_assign(&self.actor.backward(&upstream)?);
        }

        actor_grad.clip_norm(self.cfg.grad_clip);
        critic_grad.clip_norm(self.cfg.grad_clip);
        self.actor.sgd_step(&actor_grad, self.cfg.lr_actor);
        self.critic.sgd_step(&critic_grad, self.cfg.lr_critic);
        let norm = log_std_grad.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = if norm > self.cfg.grad_clip { self.cfg.grad_clip / norm } else { 1.0 };
        for (s, gs) in self.log_std.iter_mut().zip(&log_std_grad) {
            *s = (*s - self.cfg.lr_actor * scale * gs).clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
        Ok((policy_loss, value_loss))
    }
}

impl Policy for A2cAgent {
    fn act(&mut self, obs: &Observation, explore: bool) -> Vec<f64> {
        let a = self.sample(&obs.vector, explore).expect("observation matches network input");
        self.last_raw = match &a {
            Action::Continuous(u) => Some(u.clone()),
            Action::Discrete(_) => None,
        };
        self.to_env(&a)
    }

    fn observe(&mut self, state: &[f64], action: &[f64], reward: f64, next_state: &[f64], done: bool) {
        let action = if self.is_continuous() {
            match self.last_raw.take() {
                Some(u) if u.iter().zip(action).all(|(r, a)| r.tanh() == *a) => Action::Continuous(u),
                _ => Action::Continuous(action.iter().map(|a| a.clamp(-ATANH_CLAMP, ATANH_CLAMP).atanh()).collect()),
            }
        } else {
            Action::Discrete(self.space.encode(action))
        };
        self.rollout.push(Transition {
            state: state.to_vec(),
            action,
            reward,
            next_state: next_state.to_vec(),
            done,
        });
    }

    fn learn(&mut self) -> Result<Option<f64>, AgentError> {
        let ready = self.rollout.len() >= self.cfg.n_steps || self.rollout.last().is_some_and(|t| t.done);
        if !ready {
            return Ok(None);
        }
        let rollout = std::mem::take(&mut self.rollout);
        let (p, v) = self.learn_rollout(&rollout)?;
        Ok(Some(p + v))
    }

    fn save(&self) -> Vec<u8> {
        let mut out = Vec::new();
        encode_mlp(&self.actor, &mut out);
        encode_mlp(&self.critic, &mut out);
        out.extend_from_slice(&(self.log_std.len() as u32).to_le_bytes());
        for s in &self.log_std {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    fn load(&mut self, blob: &[u8]) -> Result<(), AgentError> {
        let mut r = BlobReader::new(blob);
        let mut actor = self.actor.clone();
        let mut critic = self.critic.clone();
        r.read_mlp_into(&mut actor)?;
        r.read_mlp_into(&mut critic)?;
        let n = r.u32()? as usize;
        if n != self.log_std.len() {
            return Err(AgentError::BadBlob(format!("log-std length {n} does not match {}", self.log_std.len())));
        }
        let log_std = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        if !r.is_empty() {
            return Err(AgentError::BadBlob("trailing bytes after parameters".into()));
        }
        self.actor = actor;
        self.critic = critic;
        self.log_std = log_std;
        Ok(())
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = stream_rng(seed, 0);
    }

    fn begin_episode(&mut self) {
        self.rollout.clear();
        self.last_raw = None;
    }
}
