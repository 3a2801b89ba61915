use ndarray::Array2;
use rand::Rng;

use super::{Actor, BaseAlgo, CriticEnsemble, Hyperparams};
use crate::error::Result;
use crate::losses::{actor_loss, critic_regression, ActorBatch, ActorLoss};
use crate::rng::SimRng;
use crate::tensor::{ema_update, AdamState};

/// Parameters, optimizers and counters of one actor-critic learner.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub base: BaseAlgo,
    pub actor: Actor,
    /// Polyak-averaged copy of the actor (bootstraps TD3 targets).
    pub actor_target: Actor,
    pub actor_optim: AdamState,
    pub critics: CriticEnsemble,
    pub hyper: Hyperparams,
    pub utd: usize,
    pub env_steps: u64,
    /// Critic updates performed.
    pub grad_steps: u64,
    pub actor_steps: u64,
    pub rng: SimRng,
}

impl TrainState {
    pub fn new(base: BaseAlgo, actor: Actor, critics: CriticEnsemble, hyper: Hyperparams, utd: usize, rng: SimRng) -> Self {
        let actor_optim = AdamState::new(&actor.net, hyper.lr);
        TrainState {
            base,
            actor_target: actor.clone(),
            actor,
            actor_optim,
            critics,
            hyper,
            utd,
            env_steps: 0,
            grad_steps: 0,
            actor_steps: 0,
            rng,
        }
    }

    /// Regresses every critic onto the shared targets, then moves the
    /// target critics. Returns the mean loss over members.
    pub fn critic_update(&mut self, states: &Array2<f64>, actions: &Array2<f64>, targets: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for k in 0..self.critics.len() {
            let (loss, grads) = critic_regression(&self.critics.online[k], states, actions, targets)?;
            self.critics.step(k, &grads)?;
            total += loss;
        }
        self.critics.update_targets(self.hyper.tau)?;
        self.grad_steps += 1;
        Ok(total / self.critics.len() as f64)
    }

    /// One actor step on the minimum over the `critic_ids` online critics.
    pub fn actor_update(&mut self, batch: &ActorBatch<'_>, critic_ids: &[usize]) -> Result<ActorLoss> {
        let critics: Vec<_> = critic_ids.iter().map(|&k| &self.critics.online[k]).collect();
        let out = actor_loss(&self.actor, &critics, batch)?;
        self.actor_optim.step(&mut self.actor.net, &out.grads)?;
        if self.base == BaseAlgo::Td3 {
            ema_update(&mut self.actor_target.net, &self.actor.net, self.hyper.tau)?;
        }
        self.actor_steps += 1;
        Ok(out)
    }

    /// Whether the actor should step after the current critic update.
    pub fn actor_due(&self) -> bool {
        match self.base {
            BaseAlgo::Sac => true,
            BaseAlgo::Td3 => self.grad_steps % self.hyper.td3_policy_delay.max(1) as u64 == 0,
        }
    }

    pub fn noise<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> Array2<f64> {
        self.actor.draw_noise(rows, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::PolicyKind;
    use crate::rng::rng_from_seed;
    use ndarray::array;

    fn state(seed: u64) -> TrainState {
        let mut rng = rng_from_seed(seed);
        let hyper = Hyperparams { lr: 1e-2, tau: 1.0, ..Hyperparams::desk() };
        let actor = Actor::new(1, 1, &[8], PolicyKind::Deterministic, &mut rng).unwrap();
        let critics = CriticEnsemble::new(2, 1, 1, &[16, 16], hyper.lr, &mut rng).unwrap();
        TrainState::new(BaseAlgo::Td3, actor, critics, hyper, 1, rng)
    }

    #[test]
    fn single_state_geometric_value() {
        // one state, one action, reward 1, gamma 0.8: Q -> 1 / (1 - 0.8) = 5
        let mut st = state(0);
        let s = array![[0.0]];
        let a = array![[0.0]];
        for _ in 0..3000 {
            let q = st.critics.q_min(s.view(), a.view(), &[0, 1], true).unwrap()[0];
            st.critic_update(&s, &a, &[1.0 + 0.8 * q]).unwrap();
        }
        let q = st.critics.q_all(s.view(), a.view(), false).unwrap();
        assert!(q.iter().all(|v| (v[0] - 5.0).abs() < 1e-2), "{q:?}");
        assert_eq!(st.grad_steps, 3000);
    }

    #[test]
    fn fixed_batch_loss_trends_down() {
        let mut st = state(1);
        let s = array![[0.1], [0.5], [-0.4], [0.9]];
        let a = array![[0.3], [-0.2], [0.0], [0.7]];
        let y = [1.0, -0.5, 0.25, 2.0];
        let first = st.critic_update(&s, &a, &y).unwrap();
        let mut last = first;
        for _ in 0..99 {
            last = st.critic_update(&s, &a, &y).unwrap();
        }
        assert!(last < 0.5 * first, "{first} -> {last}");
    }

    #[test]
    fn deterministic_actor_finds_quadratic_peak() {
        // Q(s, a) = -(a - 0.5)^2 built exactly from relu units is awkward, so
        // fit the critic first and then let the actor climb it
        let mut st = state(2);
        let mut rng = rng_from_seed(3);
        let s = Array2::zeros((64, 1));
        for _ in 0..3000 {
            let a = Array2::from_shape_simple_fn((64, 1), || rng.random_range(-1.0..1.0));
            let y: Vec<f64> = a.iter().map(|v| -(v - 0.5f64).powi(2)).collect();
            st.critic_update(&s, &a, &y).unwrap();
        }
        let noise = Array2::zeros((64, 1));
        for _ in 0..1500 {
            let batch = ActorBatch { inputs: &s, states: &s, base: None, noise: &noise, alpha: 0.0, bc: None };
            st.actor_update(&batch, &[0, 1]).unwrap();
        }
        let a = st.actor.mean_action(&[0.0]).unwrap()[0];
        assert!((a - 0.5).abs() < 0.05, "{a}");
    }
}
