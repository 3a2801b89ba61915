use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Actor, CriticEnsemble, Hyperparams};
use crate::error::{Error, Result};
use crate::replay::NStepBatch;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseAlgo {
    Sac,
    Td3,
}

impl BaseAlgo {
    pub fn name(self) -> &'static str {
        match self {
            BaseAlgo::Sac => "sac",
            BaseAlgo::Td3 => "td3",
        }
    }

    pub fn policy_kind(self) -> super::PolicyKind {
        match self {
            BaseAlgo::Sac => super::PolicyKind::Stochastic,
            BaseAlgo::Td3 => super::PolicyKind::Deterministic,
        }
    }
}

/// `y = R + gamma^h' (1 - terminal) (Q_next - alpha log pi)`, row by row.
pub fn bootstrap_targets(batch: &NStepBatch, next_q: &[f64], next_log_probs: Option<&[f64]>, alpha: f64) -> Result<Vec<f64>> {
    if next_q.len() != batch.len() || next_log_probs.is_some_and(|lp| lp.len() != batch.len()) {
        return Err(Error::config("bootstrap values do not match the batch size"));
    }
    Ok((0..batch.len())
        .map(|i| {
            if batch.terminal[i] {
                batch.returns[i]
            } else {
                let soft = next_log_probs.map_or(0.0, |lp| alpha * lp[i]);
                batch.returns[i] + batch.discounts[i] * (next_q[i] - soft)
            }
        })
        .collect())
}

/// Target-policy smoothing: `clip(a + clip(sigma * eps, -c, c), -1, 1)`.
pub fn smooth_target_actions<R: Rng + ?Sized>(actions: &Array2<f64>, sigma: f64, clip: f64, rng: &mut R) -> Array2<f64> {
    actions.mapv(|a| {
        let e: f64 = rng.sample(StandardNormal);
        (a + (sigma * e).clamp(-clip, clip)).clamp(-1.0, 1.0)
    })
}

/// Next-state action proposals of the online policy for bootstrapping: a
/// reparameterized draw with its log-density (SAC) or the smoothed target
/// policy action (TD3).
pub fn bootstrap_actions<R: Rng + ?Sized>(
    base: BaseAlgo,
    actor: &Actor,
    actor_target: &Actor,
    inputs: ArrayView2<f64>,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Result<(Array2<f64>, Option<Vec<f64>>)> {
    match base {
        BaseAlgo::Sac => {
            let s = actor.sample_actions(inputs, rng)?;
            Ok((s.actions, Some(s.log_probs)))
        }
        BaseAlgo::Td3 => {
            let a = actor_target.mean_actions(inputs)?;
            Ok((smooth_target_actions(&a, hyper.td3_target_noise, hyper.td3_noise_clip, rng), None))
        }
    }
}

/// h-step target with the minimum over a fresh random critic subset.
pub fn q_target<R: Rng + ?Sized>(
    batch: &NStepBatch,
    ensemble: &CriticEnsemble,
    base: BaseAlgo,
    actor: &Actor,
    actor_target: &Actor,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let subset = ensemble.draw_subset(hyper.subset_size, rng)?;
    let (next_actions, lp) = bootstrap_actions(base, actor, actor_target, batch.next_states.view(), hyper, rng)?;
    let q = ensemble.q_min(batch.next_states.view(), next_actions.view(), &subset, true)?;
    bootstrap_targets(batch, &q, lp.as_deref(), hyper.alpha)
}
