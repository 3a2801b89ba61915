//! Offline dataset production: rollouts of a policy, expert training and
//! return-based episode filtering.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::compose::{compose, AgentSpec, OfflineInputs};
use crate::envs::{make_env, EnvSpec, ScriptedExpert};
use crate::error::{Error, Result};
use crate::metrics::RunRecord;
use crate::replay::{Episode, Transition, TrajectoryDataset};
use crate::rl::{train_online, Actor, BaseAlgo, Hyperparams, TrainFailure};
use crate::rng::{derive_seed, rng_from_seed};

const ROLLOUT_STREAM: u64 = 0x524f_4c4c;

/// When to stop collecting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Collect {
    Episodes(usize),
    /// Whole episodes until at least this many transitions.
    Transitions(usize),
}

/// A collected dataset with the per-episode success flags.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollouts {
    pub dataset: TrajectoryDataset,
    pub successes: Vec<bool>,
}

impl Rollouts {
    pub fn success_fraction(&self) -> f64 {
        if self.successes.is_empty() {
            return 0.0;
        }
        self.successes.iter().filter(|s| **s).count() as f64 / self.successes.len() as f64
    }
}

/// Runs `policy` for whole episodes. Episode `k` resets with a seed derived
/// from `(seed, k)`, so collections are reproducible.
pub fn collect_episodes(
    env: &EnvSpec,
    policy: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    stop: Collect,
    gamma: f64,
    seed: u64,
) -> Result<Rollouts> {
    let mut e = make_env(env)?;
    let mut out = Rollouts { dataset: TrajectoryDataset::new(env.state_dim, env.action_dim, gamma, env.horizon), successes: Vec::new() };
    let mut k = 0u64;
    loop {
        let done = match stop {
            Collect::Episodes(n) => out.dataset.episodes.len() >= n,
            Collect::Transitions(n) => out.dataset.num_transitions() >= n,
        };
        if done {
            break;
        }
        let mut s = e.reset(derive_seed(seed ^ ROLLOUT_STREAM, k));
        let mut trs = Vec::with_capacity(env.horizon);
        let mut success = false;
        for t in 0.. {
            let a = policy(&s)?;
            let r = e.step(&a)?;
            let a = a.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
            trs.push(Transition { state: s, action: a, reward: r.reward, next_state: r.next_state.clone(), terminal: r.terminal, episode_id: k, t });
            success = r.success;
            let over = r.episode_over();
            s = r.next_state;
            if over {
                break;
            }
        }
        out.dataset.episodes.push(Episode { id: k, transitions: trs });
        out.successes.push(success);
        k += 1;
    }
    Ok(out)
}

/// Scripted controller with Gaussian action noise of scale `noise`.
pub fn scripted_demos(env: &EnvSpec, episodes: usize, noise: f64, gamma: f64, seed: u64) -> Result<Rollouts> {
    let expert = ScriptedExpert::for_env(&env.name)?;
    let mut rng = rng_from_seed(derive_seed(seed, 0x4558_5052));
    let mut policy = |s: &[f64]| -> Result<Vec<f64>> {
        Ok(expert.act(s).into_iter().map(|a| (a + noise * rng.sample::<f64, _>(StandardNormal)).clamp(-1.0, 1.0)).collect())
    };
    collect_episodes(env, &mut policy, Collect::Episodes(episodes), gamma, seed)
}

/// Stochastic rollouts of a learned policy.
pub fn policy_rollouts(env: &EnvSpec, actor: &Actor, stop: Collect, gamma: f64, seed: u64) -> Result<Rollouts> {
    if actor.state_dim() != env.state_dim || actor.action_dim() != env.action_dim {
        return Err(Error::config(format!(
            "policy maps {} -> {} but {} has n={} m={}",
            actor.state_dim(),
            actor.action_dim(),
            env.name,
            env.state_dim,
            env.action_dim
        )));
    }
    let mut rng = rng_from_seed(derive_seed(seed, 0x504f_4c49));
    let mut policy = |s: &[f64]| actor.sample_action(s, &mut rng);
    collect_episodes(env, &mut policy, stop, gamma, seed)
}

/// A trained expert and the log of its completed training episodes.
#[derive(Clone, Debug)]
pub struct ExpertRun {
    pub actor: Actor,
    pub log: TrajectoryDataset,
    pub record: RunRecord,
}

/// Plain SAC trained for `budget` environment steps.
pub fn train_expert(env: &EnvSpec, budget: u64, hyper: &Hyperparams, seed: u64) -> Result<ExpertRun> {
    let spec = AgentSpec::baseline(BaseAlgo::Sac);
    let hyper = Hyperparams { buffer_capacity: hyper.buffer_capacity.max(budget as usize + env.horizon), ..hyper.clone() };
    let mut agent = compose(&spec, env, &hyper, OfflineInputs::default(), seed)?;
    let record = train_online(&mut agent, env, budget, seed).map_err(|TrainFailure { error, .. }| error)?;
    let mut log = TrajectoryDataset::new(env.state_dim, env.action_dim, hyper.gamma, env.horizon);
    for tr in agent.online.iter() {
        match log.episodes.last_mut() {
            Some(ep) if ep.id == tr.episode_id => ep.transitions.push(tr.clone()),
            _ => log.episodes.push(Episode { id: tr.episode_id, transitions: vec![tr.clone()] }),
        }
    }
    // the episode cut off by the budget is not part of the log
    if let Some(last) = log.episodes.last() {
        if agent.online.span(last.id).is_some_and(|_| !agent.online.is_complete(last.id)) {
            log.episodes.pop();
        }
    }
    Ok(ExpertRun { actor: agent.train.actor.clone(), log, record })
}

/// Keeps episodes whose undiscounted return reaches
/// `lo + fraction * (max - lo)` with `lo = min(0, min return)`; for
/// non-negative returns this is `fraction * max`.
pub fn filter_episodes(log: &TrajectoryDataset, fraction: f64) -> Result<TrajectoryDataset> {
    if log.episodes.is_empty() {
        return Err(Error::DataQuality("episode log is empty".into()));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::config(format!("filter fraction {fraction} outside [0, 1]")));
    }
    let returns: Vec<f64> = log.episodes.iter().map(Episode::total_reward).collect();
    let max = returns.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = returns.iter().cloned().fold(0.0, f64::min);
    let threshold = lo + fraction * (max - lo);
    let mut out = TrajectoryDataset::new(log.state_dim, log.action_dim, log.gamma, log.horizon);
    out.episodes = log.episodes.iter().zip(&returns).filter(|(_, r)| **r >= threshold).map(|(e, _)| e.clone()).collect();
    if out.episodes.is_empty() {
        return Err(Error::DataQuality(format!("no episode meets threshold {threshold}")));
    }
    Ok(out)
}
