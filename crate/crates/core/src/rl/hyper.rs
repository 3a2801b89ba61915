use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training hyperparameters. [`Hyperparams::default`] is the full-scale
/// configuration; [`Hyperparams::desk`] shrinks networks, batches and
/// schedules for single-CPU runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub gamma: f64,
    /// h of the h-step target.
    pub nstep: usize,
    pub tau: f64,
    pub batch_size: usize,
    pub lr: f64,
    pub utd: usize,
    pub utd_prefill: usize,
    pub hidden_dim: usize,
    pub actor_layers: usize,
    pub critic_layers: usize,
    pub num_critics: usize,
    pub num_critics_prefill: usize,
    /// Size of the random critic subset used in targets.
    pub subset_size: usize,
    pub alpha: f64,
    pub td3_target_noise: f64,
    pub td3_noise_clip: f64,
    pub td3_explore_noise: f64,
    pub td3_policy_delay: usize,
    pub cql_actor_lr: f64,
    pub cql_weight: f64,
    pub cql_samples: usize,
    pub mcq_bootstrap_eps: f64,
    pub cheq_u_bounds: [f64; 2],
    pub cheq_lambda_bounds: [f64; 2],
    pub resrl_burn_in: u64,
    pub auxbc_alpha: f64,
    pub warmup_steps: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub pretrain_steps: usize,
    pub buffer_capacity: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            gamma: 0.8,
            nstep: 3,
            tau: 0.01,
            batch_size: 1024,
            lr: 3e-4,
            utd: 1,
            utd_prefill: 5,
            hidden_dim: 256,
            actor_layers: 3,
            critic_layers: 3,
            num_critics: 2,
            num_critics_prefill: 5,
            subset_size: 2,
            alpha: 0.2,
            td3_target_noise: 0.1,
            td3_noise_clip: 0.5,
            td3_explore_noise: 0.1,
            td3_policy_delay: 2,
            cql_actor_lr: 3e-5,
            cql_weight: 5.0,
            cql_samples: 10,
            mcq_bootstrap_eps: 0.1,
            cheq_u_bounds: [0.15, 0.275],
            cheq_lambda_bounds: [0.2, 1.0],
            resrl_burn_in: 20_000,
            auxbc_alpha: 2.5,
            warmup_steps: 1000,
            eval_every: 1000,
            eval_episodes: 20,
            pretrain_steps: 20_000,
            buffer_capacity: 1_000_000,
        }
    }
}

impl Hyperparams {
    /// Desk-scale preset: small networks and batches, burn-in scaled by 1/10.
    pub fn desk() -> Self {
        Hyperparams {
            batch_size: 128,
            hidden_dim: 64,
            actor_layers: 2,
            critic_layers: 2,
            resrl_burn_in: 2_000,
            pretrain_steps: 5_000,
            ..Default::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "default" | "full" => Ok(Self::default()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::config(format!("unknown preset '{other}' (expected 'full' or 'desk')"))),
        }
    }

    pub fn hidden(&self, layers: usize) -> Vec<usize> {
        vec![self.hidden_dim; layers]
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, why: &str| Err(Error::config(format!("hyper.{field}: {why}")));
        if !(0.0..1.0).contains(&self.gamma) {
            return fail("gamma", "must lie in [0, 1)");
        }
        if self.nstep == 0 {
            return fail("nstep", "must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return fail("tau", "must lie in [0, 1]");
        }
        if self.batch_size == 0 {
            return fail("batch_size", "must be positive");
        }
        if self.hidden_dim == 0 {
            return fail("hidden_dim", "must be positive");
        }
        if self.num_critics < self.subset_size || self.num_critics_prefill < self.subset_size {
            return fail("num_critics", "ensemble smaller than the target subset");
        }
        if self.subset_size == 0 {
            return fail("subset_size", "must be positive");
        }
        if self.cheq_u_bounds[0] >= self.cheq_u_bounds[1] {
            return fail("cheq_u_bounds", "lower bound must be below upper bound");
        }
        if !(self.cheq_lambda_bounds[0] <= self.cheq_lambda_bounds[1]
            && self.cheq_lambda_bounds[0] >= 0.0
            && self.cheq_lambda_bounds[1] <= 1.0)
        {
            return fail("cheq_lambda_bounds", "need 0 <= min <= max <= 1");
        }
        if !(0.0..=1.0).contains(&self.mcq_bootstrap_eps) {
            return fail("mcq_bootstrap_eps", "must lie in [0, 1]");
        }
        if self.eval_every == 0 || self.eval_episodes == 0 {
            return fail("eval_every", "evaluation cadence and episode count must be positive");
        }
        if self.utd == 0 || self.utd_prefill == 0 {
            return fail("utd", "must be at least 1");
        }
        Ok(())
    }
}
