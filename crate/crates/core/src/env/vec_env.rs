use std::time::Instant;

use rayon::prelude::*;

use super::{EnvError, Environment, Observation, StepResult};
use crate::seed::child_seed;

/// Wraps an env so that a finished episode immediately resets with the
/// next derived sub-seed.
#[derive(Debug, Clone)]
pub struct AutoReset<E> {
    env: E,
    base_seed: u64,
    episode: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotStep {
    pub result: StepResult,
    /// First observation of the next episode when `result.done`.
    pub reset_obs: Option<Observation>,
}

impl<E: Environment> AutoReset<E> {
    pub fn new(env: E) -> Self {
        AutoReset { env, base_seed: 0, episode: 0 }
    }

    pub fn reset(&mut self, seed: u64) -> Observation {
        self.base_seed = seed;
        self.episode = 0;
        self.env.reset(seed)
    }

    pub fn step(&mut self, action: &[f64]) -> Result<SlotStep, EnvError> {
        let result = self.env.step(action)?;
        let reset_obs = if result.done {
            self.episode += 1;
            Some(self.env.reset(child_seed(self.base_seed, self.episode)))
        } else {
            None
        };
        Ok(SlotStep { result, reset_obs })
    }

    pub fn inner(&self) -> &E {
        &self.env
    }
}

#[derive(Debug, Clone)]
pub struct VecStep {
    pub results: Vec<SlotStep>,
    /// Env steps per second for this call (informational).
    pub steps_per_sec: f64,
}

/// `K` independent environments stepped in parallel. Results are identical
/// to stepping each slot sequentially with the same seeds and actions.
pub struct VecEnv<E> {
    slots: Vec<AutoReset<E>>,
}

impl<E: Environment> VecEnv<E> {
    pub fn new(envs: Vec<E>) -> Self {
        VecEnv { slots: envs.into_iter().map(AutoReset::new).collect() }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slots(&self) -> &[AutoReset<E>] {
        &self.slots
    }

    pub fn vec_reset(&mut self, seeds: &[u64]) -> Result<Vec<Observation>, EnvError> {
        if seeds.len() != self.slots.len() {
            return Err(EnvError::ShapeMismatch { expected: self.slots.len(), got: seeds.len() });
        }
        if rayon::current_num_threads() == 1 {
            return Ok(self.slots.iter_mut().zip(seeds).map(|(s, seed)| s.reset(*seed)).collect());
        }
        Ok(self.slots.par_iter_mut().zip(seeds.par_iter()).map(|(s, seed)| s.reset(*seed)).collect())
    }

    pub fn vec_step(&mut self, actions: &[Vec<f64>]) -> Result<VecStep, EnvError> {
        if actions.len() != self.slots.len() {
            return Err(EnvError::ShapeMismatch { expected: self.slots.len(), got: actions.len() });
        }
        for (slot, a) in self.slots.iter().zip(actions) {
            if a.len() != slot.env.action_dim() {
                return Err(EnvError::ShapeMismatch { expected: slot.env.action_dim(), got: a.len() });
            }
        }
        let start = Instant::now();
        // A single-thread pool gains nothing from task dispatch.
        let results: Result<Vec<SlotStep>, EnvError> = if rayon::current_num_threads() == 1 {
            self.slots.iter_mut().zip(actions).map(|(s, a)| s.step(a)).collect()
        } else {
            self.slots.par_iter_mut().zip(actions.par_iter()).map(|(s, a)| s.step(a)).collect()
        };
        let elapsed = start.elapsed().as_secs_f64().max(1e-9);
        Ok(VecStep { results: results?, steps_per_sec: self.slots.len() as f64 / elapsed })
    }
}
