use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{ActionSpace, AgentError, Policy};
use crate::env::Observation;
use crate::seed::stream_rng;

/// Uniformly random actions (grid levels or uniform in `[-1, 1]`).
pub struct RandomPolicy {
    space: ActionSpace,
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(space: ActionSpace, seed: u64) -> Self {
        RandomPolicy { space, rng: stream_rng(seed, 0) }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, _obs: &Observation, _explore: bool) -> Vec<f64> {
        match &self.space {
            ActionSpace::Continuous(d) => (0..*d).map(|_| self.rng.random_range(-1.0..=1.0)).collect(),
            space => {
                let choice: Vec<usize> = space.heads().iter().map(|h| self.rng.random_range(0..*h)).collect();
                space.decode(&choice)
            }
        }
    }
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
    fn reseed(&mut self, seed: u64) {
        self.rng = stream_rng(seed, 0);
    }
}

/// Emits the same env action every step.
#[derive(Debug, Clone)]
pub struct ConstantPolicy {
    action: Vec<f64>,
}

impl ConstantPolicy {
    pub fn new(action: Vec<f64>) -> Self {
        ConstantPolicy { action }
    }
}

impl Policy for ConstantPolicy {
    fn act(&mut self, _obs: &Observation, _explore: bool) -> Vec<f64> {
        self.action.clone()
    }
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
}
