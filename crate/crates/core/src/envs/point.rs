use rand::Rng;

use super::{check_action, EnvSpec, Environment, StepResult};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub const DT: f64 = 0.1;
pub const ACCEL: f64 = 2.0;
pub const DAMPING: f64 = 2.0;
pub const GOAL_TOLERANCE: f64 = 0.05;
pub const SUCCESS_BONUS: f64 = 1.0;
/// The box follows the mass while they are closer than this.
pub const PUSH_RADIUS: f64 = 0.2;
/// Fraction of the mass-box gap closed per step while in range.
pub const PUSH_PULL: f64 = 0.5;
const REACH_GOAL: [f64; 2] = [0.0, 0.0];

/// Semi-implicit Euler: velocity first, then position with the new velocity.
/// Positions stay inside `[-1, 1]`; hitting a wall zeroes that velocity component.
fn integrate(pos: &mut [f64; 2], vel: &mut [f64; 2], action: &[f64]) {
    for k in 0..2 {
        vel[k] = vel[k] * (1.0 - DAMPING * DT) + ACCEL * DT * action[k];
        pos[k] += DT * vel[k];
        if pos[k].abs() > 1.0 {
            pos[k] = pos[k].clamp(-1.0, 1.0);
            vel[k] = 0.0;
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Point mass that must reach the origin.
#[derive(Clone, Debug)]
pub struct PointReach {
    spec: EnvSpec,
    pos: [f64; 2],
    vel: [f64; 2],
    t: usize,
    success: bool,
}

impl PointReach {
    pub fn new(spec: EnvSpec) -> Self {
        PointReach { spec, pos: [0.0; 2], vel: [0.0; 2], t: 0, success: false }
    }

    /// Places the mass at rest at `pos`; for hand-built test cases.
    pub fn set_state(&mut self, pos: [f64; 2], vel: [f64; 2]) {
        self.pos = pos;
        self.vel = vel;
    }

    pub fn goal() -> [f64; 2] {
        REACH_GOAL
    }

    fn observe(&self) -> Vec<f64> {
        vec![self.pos[0], self.pos[1], self.vel[0], self.vel[1]]
    }
}

impl Environment for PointReach {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        self.pos = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        self.vel = [0.0; 2];
        self.t = 0;
        self.success = false;
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let a = check_action(action, 2)?;
        if self.t >= self.spec.horizon {
            return Err(Error::NotReady("episode finished; reset first".into()));
        }
        integrate(&mut self.pos, &mut self.vel, &a);
        self.t += 1;
        let d = dist(self.pos, REACH_GOAL);
        let within = d <= self.spec.goal_tolerance;
        self.success |= within;
        let reward = -d + if within { SUCCESS_BONUS } else { 0.0 };
        Ok(StepResult {
            next_state: self.observe(),
            reward,
            terminal: self.t >= self.spec.horizon,
            truncated: false,
            success: self.success,
        })
    }

    fn steps_taken(&self) -> usize {
        self.t
    }
}

/// Point mass that drags a box onto a goal. The box is pulled toward the mass
/// whenever it lies inside [`PUSH_RADIUS`]; there is no contact model.
#[derive(Clone, Debug)]
pub struct PointPush {
    spec: EnvSpec,
    pos: [f64; 2],
    vel: [f64; 2],
    boxp: [f64; 2],
    goal: [f64; 2],
    t: usize,
    success: bool,
}

impl PointPush {
    pub fn new(spec: EnvSpec) -> Self {
        PointPush { spec, pos: [0.0; 2], vel: [0.0; 2], boxp: [0.0; 2], goal: [0.0; 2], t: 0, success: false }
    }

    fn observe(&self) -> Vec<f64> {
        vec![
            self.pos[0],
            self.pos[1],
            self.vel[0],
            self.vel[1],
            self.boxp[0],
            self.boxp[1],
            self.goal[0],
            self.goal[1],
        ]
    }
}

impl Environment for PointPush {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        self.pos = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        self.vel = [0.0; 2];
        self.boxp = [rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7)];
        loop {
            self.goal = [rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7)];
            if dist(self.goal, self.boxp) > 4.0 * self.spec.goal_tolerance {
                break;
            }
        }
        self.t = 0;
        self.success = false;
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let a = check_action(action, 2)?;
        if self.t >= self.spec.horizon {
            return Err(Error::NotReady("episode finished; reset first".into()));
        }
        integrate(&mut self.pos, &mut self.vel, &a);
        if dist(self.pos, self.boxp) < PUSH_RADIUS {
            for k in 0..2 {
                self.boxp[k] += PUSH_PULL * (self.pos[k] - self.boxp[k]);
            }
        }
        self.t += 1;
        let to_goal = dist(self.boxp, self.goal);
        let within = to_goal <= self.spec.goal_tolerance;
        self.success |= within;
        let reward = -0.5 * (to_goal + dist(self.pos, self.boxp)) + if within { SUCCESS_BONUS } else { 0.0 };
        Ok(StepResult {
            next_state: self.observe(),
            reward,
            terminal: self.t >= self.spec.horizon,
            truncated: false,
            success: self.success,
        })
    }

    fn steps_taken(&self) -> usize {
        self.t
    }
}

/// Hand-written PD controllers for the point tasks. Doubles as a zero-cost
/// demonstrator.
#[derive(Clone, Debug)]
pub struct ScriptedExpert {
    pub env_name: String,
    pub kp: f64,
    pub kd: f64,
}

impl ScriptedExpert {
    pub fn for_env(name: &str) -> Result<Self> {
        match name {
            "point-reach" | "point-push" => Ok(ScriptedExpert { env_name: name.to_string(), kp: 6.0, kd: 1.5 }),
            other => Err(Error::config(format!("no scripted expert for '{other}'"))),
        }
    }

    fn pd(&self, pos: [f64; 2], vel: [f64; 2], target: [f64; 2], limit: f64) -> Vec<f64> {
        (0..2)
            .map(|k| (self.kp * (target[k] - pos[k]) - self.kd * vel[k]).clamp(-limit, limit))
            .collect()
    }

    pub fn act(&self, state: &[f64]) -> Vec<f64> {
        let pos = [state[0], state[1]];
        let vel = [state[2], state[3]];
        if self.env_name == "point-reach" {
            return self.pd(pos, vel, REACH_GOAL, 1.0);
        }
        let boxp = [state[4], state[5]];
        let goal = [state[6], state[7]];
        if dist(pos, boxp) > 0.5 * PUSH_RADIUS {
            self.pd(pos, vel, boxp, 1.0)
        } else {
            // slow down while carrying so the box keeps up
            self.pd(pos, vel, goal, 0.5)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::make_env;

    fn reach() -> PointReach {
        PointReach::new(EnvSpec::named("point-reach").unwrap())
    }

    #[test]
    fn at_goal_at_rest_succeeds() {
        let mut env = reach();
        env.reset(0);
        env.set_state([0.0, 0.0], [0.0, 0.0]);
        let r = env.step(&[0.0, 0.0]).unwrap();
        assert!(r.success);
        assert_eq!(r.reward, 1.0 - 0.0);
    }

    #[test]
    fn zero_action_off_goal_stays_put() {
        let mut env = reach();
        env.reset(0);
        env.set_state([0.3, -0.4], [0.0, 0.0]);
        let r = env.step(&[0.0, 0.0]).unwrap();
        assert_eq!(&r.next_state[..2], &[0.3, -0.4]);
        assert_eq!(r.reward, -0.5);
        assert!(!r.success);
    }

    #[test]
    fn golden_trace() {
        // hand-evaluated from v' = 0.8 v + 0.2 a, p' = p + 0.1 v'
        let mut env = reach();
        env.reset(0);
        env.set_state([0.5, -0.2], [0.0, 0.0]);
        let actions = [[1.0, 0.0], [1.0, -1.0], [-3.0, 0.5]];
        let golden = [
            [0.52, -0.2, 0.2, 0.0],
            [0.556, -0.22, 0.36, -0.2],
            [0.5648, -0.226, 0.088, -0.06],
        ];
        for (a, want) in actions.iter().zip(golden) {
            let r = env.step(a).unwrap();
            for (g, w) in r.next_state.iter().zip(want) {
                assert!((g - w).abs() < 1e-12, "{:?} vs {:?}", r.next_state, want);
            }
        }
    }

    #[test]
    fn wall_stops_the_mass() {
        let mut env = reach();
        env.reset(0);
        env.set_state([0.99, 0.0], [1.0, 0.0]);
        let r = env.step(&[1.0, 0.0]).unwrap();
        assert_eq!(r.next_state[0], 1.0);
        assert_eq!(r.next_state[2], 0.0);
    }

    #[test]
    fn success_latches() {
        let mut env = reach();
        env.reset(0);
        env.set_state([0.0, 0.0], [0.0, 0.0]);
        assert!(env.step(&[0.0, 0.0]).unwrap().success);
        let r = env.step(&[1.0, 1.0]).unwrap();
        let r = if r.next_state[0] > GOAL_TOLERANCE { r } else { env.step(&[1.0, 1.0]).unwrap() };
        assert!(r.success);
        assert!(r.reward < 0.0);
    }

    #[test]
    fn scripted_expert_solves_reach() {
        let spec = EnvSpec::named("point-reach").unwrap();
        let expert = ScriptedExpert::for_env("point-reach").unwrap();
        let mut env = make_env(&spec).unwrap();
        let mut wins = 0;
        for seed in 0..100 {
            let mut s = env.reset(seed);
            loop {
                let r = env.step(&expert.act(&s)).unwrap();
                s = r.next_state.clone();
                if r.episode_over() {
                    wins += r.success as usize;
                    break;
                }
            }
        }
        assert!(wins >= 95, "{wins}/100");
    }

    #[test]
    fn scripted_expert_solves_push_mostly() {
        let spec = EnvSpec::named("point-push").unwrap();
        let expert = ScriptedExpert::for_env("point-push").unwrap();
        let mut env = make_env(&spec).unwrap();
        let mut wins = 0;
        for seed in 0..100 {
            let mut s = env.reset(seed);
            loop {
                let r = env.step(&expert.act(&s)).unwrap();
                s = r.next_state.clone();
                if r.episode_over() {
                    wins += r.success as usize;
                    break;
                }
            }
        }
        assert!(wins >= 80, "{wins}/100");
    }
}
