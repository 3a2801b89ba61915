//! Desk-scale continuous-control tasks addressed by name.
//!
//! | name          | state | action | notes                                      |
//! |---------------|-------|--------|--------------------------------------------|
//! | `point-reach` | 4     | 2      | 2-D point mass, fixed goal at the origin   |
//! | `point-push`  | 8     | 2      | point mass drags a box onto a random goal  |
//! | `chain3`      | 3     | 1      | action-independent 3-state cycle (oracle)  |

mod chain;
mod point;

pub use chain::{Chain3, CHAIN_REWARDS};
pub use point::{PointPush, PointReach, ScriptedExpert, DT, GOAL_TOLERANCE};

use crate::error::{Error, Result};

pub const DEFAULT_HORIZON: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub name: String,
    pub state_dim: usize,
    pub action_dim: usize,
    pub horizon: usize,
    pub goal_tolerance: f64,
    pub seed: u64,
}

impl EnvSpec {
    /// Registry defaults for a named task.
    pub fn named(name: &str) -> Result<Self> {
        let (state_dim, action_dim) = match name {
            "point-reach" => (4, 2),
            "point-push" => (8, 2),
            "chain3" => (3, 1),
            other => return Err(Error::config(format!("unknown environment '{other}'"))),
        };
        Ok(EnvSpec {
            name: name.to_string(),
            state_dim,
            action_dim,
            horizon: DEFAULT_HORIZON,
            goal_tolerance: GOAL_TOLERANCE,
            seed: 0,
        })
    }

    /// Half the diagonal of the `[-1, 1]^2` workspace, doubled: `2 * sqrt(2)`.
    pub fn workspace_diagonal(&self) -> f64 {
        2.0 * std::f64::consts::SQRT_2
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub reward: f64,
    /// Bootstrapping must stop here.
    pub terminal: bool,
    /// Time limit reached without a true terminal.
    pub truncated: bool,
    /// Latched success flag for the episode so far.
    pub success: bool,
}

impl StepResult {
    pub fn episode_over(&self) -> bool {
        self.terminal || self.truncated
    }
}

pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    /// Samples an initial state from a stream seeded by `seed` and zeroes the step counter.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    /// Clips `action` to `[-1, 1]^m` and advances one step.
    fn step(&mut self, action: &[f64]) -> Result<StepResult>;

    fn steps_taken(&self) -> usize;
}

pub fn make_env(spec: &EnvSpec) -> Result<Box<dyn Environment>> {
    let defaults = EnvSpec::named(&spec.name)?;
    if spec.state_dim != defaults.state_dim || spec.action_dim != defaults.action_dim {
        return Err(Error::config(format!(
            "{}: dims must be n={} m={}",
            spec.name, defaults.state_dim, defaults.action_dim
        )));
    }
    if spec.horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }
    if spec.goal_tolerance <= 0.0 {
        return Err(Error::config("goal tolerance must be positive"));
    }
    Ok(match spec.name.as_str() {
        "point-reach" => Box::new(PointReach::new(spec.clone())),
        "point-push" => Box::new(PointPush::new(spec.clone())),
        "chain3" => Box::new(Chain3::new(spec.clone())),
        _ => unreachable!("validated by EnvSpec::named"),
    })
}

pub(crate) fn check_action(action: &[f64], m: usize) -> Result<Vec<f64>> {
    if action.len() != m {
        return Err(Error::config(format!("action has {} entries, expected {m}", action.len())));
    }
    if let Some(bad) = action.iter().find(|a| a.is_nan()) {
        return Err(Error::numerical("action", *bad));
    }
    Ok(action.iter().map(|a| a.clamp(-1.0, 1.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_dims() {
        let reach = make_env(&EnvSpec::named("point-reach").unwrap()).unwrap();
        assert_eq!((reach.spec().state_dim, reach.spec().action_dim), (4, 2));
        let push = make_env(&EnvSpec::named("point-push").unwrap()).unwrap();
        assert_eq!((push.spec().state_dim, push.spec().action_dim), (8, 2));
    }

    #[test]
    fn unknown_name_is_config_error() {
        assert!(matches!(EnvSpec::named("cartpole"), Err(Error::Config(_))));
    }

    #[test]
    fn nan_action_rejected() {
        let mut env = make_env(&EnvSpec::named("point-reach").unwrap()).unwrap();
        env.reset(0);
        assert!(matches!(env.step(&[f64::NAN, 0.0]), Err(Error::Numerical { .. })));
    }

    #[test]
    fn same_seed_same_reset() {
        for name in ["point-reach", "point-push", "chain3"] {
            let spec = EnvSpec::named(name).unwrap();
            let mut a = make_env(&spec).unwrap();
            let mut b = make_env(&spec).unwrap();
            assert_eq!(a.reset(42), b.reset(42));
        }
    }

    #[test]
    fn different_seeds_differ() {
        for name in ["point-reach", "point-push"] {
            let mut env = make_env(&EnvSpec::named(name).unwrap()).unwrap();
            let first: Vec<_> = (0..20).map(|s| env.reset(s)).collect();
            for i in 0..first.len() {
                for j in i + 1..first.len() {
                    assert_ne!(first[i], first[j]);
                }
            }
        }
    }

    #[test]
    fn episode_length_is_horizon() {
        for name in ["point-reach", "point-push", "chain3"] {
            let spec = EnvSpec::named(name).unwrap();
            let mut env = make_env(&spec).unwrap();
            env.reset(5);
            let zero = vec![0.0; spec.action_dim];
            let mut steps = 0;
            loop {
                let r = env.step(&zero).unwrap();
                steps += 1;
                if r.episode_over() {
                    break;
                }
            }
            assert_eq!(steps, spec.horizon);
            assert_eq!(env.steps_taken(), spec.horizon);
            assert!(env.step(&zero).is_err(), "stepping past the horizon must fail");
            env.reset(6);
            assert_eq!(env.steps_taken(), 0);
        }
    }
}
