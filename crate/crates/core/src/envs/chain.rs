use rand::Rng;

use super::{check_action, EnvSpec, Environment, StepResult};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Reward collected when leaving each state.
pub const CHAIN_REWARDS: [f64; 3] = [1.0, 0.0, 2.0];

/// Three one-hot states visited cyclically `0 -> 1 -> 2 -> 0`, independent of
/// the action. Episodes end by truncation only, so every transition
/// bootstraps: the values solve `V = r + gamma * P V`.
#[derive(Clone, Debug)]
pub struct Chain3 {
    spec: EnvSpec,
    state: usize,
    t: usize,
}

impl Chain3 {
    pub fn new(spec: EnvSpec) -> Self {
        Chain3 { spec, state: 0, t: 0 }
    }

    pub fn one_hot(state: usize) -> Vec<f64> {
        let mut v = vec![0.0; 3];
        v[state] = 1.0;
        v
    }

    pub fn next(state: usize) -> usize {
        (state + 1) % 3
    }
}

impl Environment for Chain3 {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.state = rng_from_seed(seed).random_range(0..3);
        self.t = 0;
        Self::one_hot(self.state)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        check_action(action, 1)?;
        if self.t >= self.spec.horizon {
            return Err(Error::NotReady("episode finished; reset first".into()));
        }
        let reward = CHAIN_REWARDS[self.state];
        self.state = Self::next(self.state);
        self.t += 1;
        Ok(StepResult {
            next_state: Self::one_hot(self.state),
            reward,
            terminal: false,
            truncated: self.t >= self.spec.horizon,
            success: false,
        })
    }

    fn steps_taken(&self) -> usize {
        self.t
    }
}
