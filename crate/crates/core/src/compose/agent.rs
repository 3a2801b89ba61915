use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use super::mix::{mix_cheq, mix_ibrl, mix_residual, CheqBounds};
use super::spec::{AgentSpec, DataSource, MixerKind};
use crate::demos::{policy_rollouts, Collect};
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::losses::{ActorBatch, BcTerm};
use crate::pretrain::OfflineCheckpoint;
use crate::replay::{sample_mixed, NStepBatch, ReplayBuffer, Source, Transition, TrajectoryDataset};
use crate::rl::{bootstrap_actions, bootstrap_targets, concat_cols, Actor, BaseAlgo, CriticEnsemble, Hyperparams, PolicyKind, TrainState};
use crate::rng::{derive_seed, rng_from_seed, SimRng};
use crate::tensor::Mlp;

const COMPOSE_STREAM: u64 = 0x434f_4d50;
const TRAIN_STREAM: u64 = 0x5452_4149;
const EXPLORE_STREAM: u64 = 0x4558_504c;
const ROLLOUT_STREAM: u64 = 0x524f_4c4c;

/// Action mixing with a fixed offline policy.
#[derive(Clone, Debug)]
pub enum Mixer {
    None,
    Ibrl { prior: Actor },
    Cheq { prior: Actor, bounds: CheqBounds },
    Residual { prior: Actor, burn_in: u64 },
}

impl Mixer {
    pub fn prior(&self) -> Option<&Actor> {
        match self {
            Mixer::None => None,
            Mixer::Ibrl { prior } | Mixer::Cheq { prior, .. } | Mixer::Residual { prior, .. } => Some(prior),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActMode {
    /// Sampled or noise-perturbed actions for data collection.
    Explore,
    /// Mean actions; never touches the exploration stream.
    Eval,
}

/// The executed action and the state the agent acted on.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub action: Vec<f64>,
    pub agent_state: Vec<f64>,
    /// Online weight chosen by the uncertainty mixer.
    pub lambda: Option<f64>,
}

/// Offline artifacts consumed by [`compose`].
#[derive(Clone, Copy, Debug, Default)]
pub struct OfflineInputs<'a> {
    pub dataset: Option<&'a TrajectoryDataset>,
    /// Pretrained policy (and critics). Required by initializations,
    /// mixers and rollouts.
    pub checkpoint: Option<&'a OfflineCheckpoint>,
}

/// A composed learner: train state, buffers, mixer and schedule.
#[derive(Clone, Debug)]
pub struct Agent {
    pub spec: AgentSpec,
    pub train: TrainState,
    pub mixer: Mixer,
    pub online: ReplayBuffer,
    pub offline: Option<ReplayBuffer>,
    pub warmup_steps: u64,
    env_state_dim: usize,
    action_dim: usize,
    explore_rng: SimRng,
}

impl Agent {
    pub fn env_state_dim(&self) -> usize {
        self.env_state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// State width seen by the actor and critics.
    pub fn agent_state_dim(&self) -> usize {
        self.env_state_dim + usize::from(matches!(self.mixer, Mixer::Cheq { .. }))
    }

    /// Weight carried in the augmented state at the start of an episode.
    pub fn initial_lambda(&self) -> f64 {
        match &self.mixer {
            Mixer::Cheq { bounds, .. } => bounds.lambda[0],
            _ => 0.0,
        }
    }

    pub fn agent_state(&self, env_state: &[f64], lambda_prev: f64) -> Vec<f64> {
        let mut s = env_state.to_vec();
        if matches!(self.mixer, Mixer::Cheq { .. }) {
            s.push(lambda_prev);
        }
        s
    }

    pub fn act(&mut self, env_state: &[f64], lambda_prev: f64, mode: ActMode) -> Result<Decision> {
        match mode {
            ActMode::Eval => self.decide(env_state, lambda_prev, None),
            ActMode::Explore => {
                let mut rng = std::mem::replace(&mut self.explore_rng, rng_from_seed(0));
                let out = self.decide(env_state, lambda_prev, Some(&mut rng));
                self.explore_rng = rng;
                out
            }
        }
    }

    fn decide(&self, env_state: &[f64], lambda_prev: f64, mut rng: Option<&mut SimRng>) -> Result<Decision> {
        if env_state.len() != self.env_state_dim {
            return Err(Error::config(format!("state has {} entries, expected {}", env_state.len(), self.env_state_dim)));
        }
        let agent_state = self.agent_state(env_state, lambda_prev);
        let m = self.action_dim;
        if let Some(r) = rng.as_deref_mut() {
            if self.train.env_steps < self.warmup_steps {
                let action = (0..m).map(|_| r.random_range(-1.0..1.0)).collect();
                return Ok(Decision { action, agent_state, lambda: None });
            }
        }
        let s_env = aview2_row(env_state);
        let s_agent = aview2_row(&agent_state);
        let a_off = match self.mixer.prior() {
            None => None,
            Some(prior) => Some(match (rng.as_deref_mut(), prior.kind) {
                (Some(r), PolicyKind::Stochastic) => prior.sample_actions(s_env, r)?.actions,
                _ => prior.mean_actions(s_env)?,
            }),
        };
        let inputs = match (&self.mixer, &a_off) {
            (Mixer::Residual { .. }, Some(a)) => concat_cols(s_env, a.view()),
            _ => s_agent.to_owned(),
        };
        let actor = &self.train.actor;
        let a_on = match rng.as_deref_mut() {
            None => actor.mean_actions(inputs.view())?,
            Some(r) => match self.train.base {
                BaseAlgo::Sac => actor.sample_actions(inputs.view(), r)?.actions,
                BaseAlgo::Td3 => {
                    let sigma = self.train.hyper.td3_explore_noise;
                    actor.mean_actions(inputs.view())?.mapv(|a| (a + sigma * r.sample::<f64, _>(StandardNormal)).clamp(-1.0, 1.0))
                }
            },
        };
        let (action, lambda) = match (&self.mixer, a_off) {
            (Mixer::None, _) | (_, None) => (a_on, None),
            (Mixer::Ibrl { .. }, Some(off)) => (mix_ibrl(s_agent, &off, &a_on, &self.train.critics, false)?.0, None),
            (Mixer::Cheq { bounds, .. }, Some(off)) => {
                let (a, l) = mix_cheq(s_agent, &off, &a_on, &self.train.critics, bounds)?;
                (a, Some(l[0]))
            }
            (Mixer::Residual { .. }, Some(off)) => (mix_residual(&off, &a_on), None),
        };
        Ok(Decision { action: action.row(0).to_vec(), agent_state, lambda })
    }

    /// Stores an online transition (agent-state space) and counts the env step.
    pub fn record(&mut self, tr: Transition) -> Result<()> {
        self.online.push(tr)?;
        self.train.env_steps += 1;
        Ok(())
    }

    pub fn end_episode(&mut self) {
        self.online.end_episode();
    }

    /// Gradient work owed for one environment step: `utd` critic updates,
    /// delayed (TD3) or per-step (SAC) actor updates.
    pub fn update(&mut self) -> Result<()> {
        if self.train.env_steps <= self.warmup_steps {
            return Ok(());
        }
        let mut last = None;
        for _ in 0..self.train.utd {
            let Some(batch) = self.critic_step()? else {
                return Ok(());
            };
            if self.train.base == BaseAlgo::Td3 && self.train.actor_due() {
                self.actor_step(&batch)?;
            }
            last = Some(batch);
        }
        if self.train.base == BaseAlgo::Sac {
            if let Some(batch) = last {
                self.actor_step(&batch)?;
            }
        }
        Ok(())
    }

    fn sample_batch(&mut self) -> Result<Option<NStepBatch>> {
        let h = &self.train.hyper;
        let (b, n, gamma) = (h.batch_size, h.nstep, h.gamma);
        let rng = &mut self.train.rng;
        match (&self.offline, self.spec.prefill) {
            (Some(off), true) => match sample_mixed(&self.online, off, b, n, gamma, rng) {
                Ok(batch) => Ok(Some(batch)),
                Err(Error::NotReady(_)) => Ok(None),
                Err(e) => Err(e),
            },
            _ if self.online.is_ready() => Ok(Some(self.online.sample_nstep(b, n, gamma, rng)?)),
            _ => Ok(None),
        }
    }

    /// Prior action for each row of `states` (agent space); sampled when the
    /// prior is stochastic.
    fn prior_actions(&mut self, states: ArrayView2<f64>) -> Result<Option<Array2<f64>>> {
        let Some(prior) = self.mixer.prior() else {
            return Ok(None);
        };
        let n = self.env_state_dim;
        let env_states = states.slice(ndarray::s![.., ..n]);
        Ok(Some(match prior.kind {
            PolicyKind::Stochastic => prior.sample_actions(env_states, &mut self.train.rng)?.actions,
            PolicyKind::Deterministic => prior.mean_actions(env_states)?,
        }))
    }

    /// One critic update; `None` while no batch can be drawn.
    pub fn critic_step(&mut self) -> Result<Option<NStepBatch>> {
        let Some(batch) = self.sample_batch()? else {
            return Ok(None);
        };
        let next = batch.next_states.view();
        let a_off = match self.mixer {
            Mixer::Ibrl { .. } | Mixer::Residual { .. } => self.prior_actions(next)?,
            _ => None,
        };
        let inputs = match (&self.mixer, &a_off) {
            (Mixer::Residual { .. }, Some(a)) => concat_cols(next, a.view()),
            _ => next.to_owned(),
        };
        let st = &mut self.train;
        let (a_on, mut log_probs) = bootstrap_actions(st.base, &st.actor, &st.actor_target, inputs.view(), &st.hyper, &mut st.rng)?;
        let next_actions = match (&self.mixer, a_off) {
            (Mixer::Ibrl { .. }, Some(off)) => {
                let (a, took_on) = mix_ibrl(next, &off, &a_on, &st.critics, true)?;
                if let Some(lp) = log_probs.as_mut() {
                    for (l, on) in lp.iter_mut().zip(took_on) {
                        if !on {
                            *l = 0.0;
                        }
                    }
                }
                a
            }
            (Mixer::Residual { .. }, Some(off)) => mix_residual(&off, &a_on),
            _ => a_on,
        };
        let subset = st.critics.draw_subset(st.hyper.subset_size, &mut st.rng)?;
        let q = st.critics.q_min(next, next_actions.view(), &subset, true)?;
        let y = bootstrap_targets(&batch, &q, log_probs.as_deref(), st.hyper.alpha)?;
        st.critic_update(&batch.states, &batch.actions, &y)?;
        Ok(Some(batch))
    }

    /// One actor update on the states of `batch` (plus an offline batch for
    /// the BC term when offline rows are not mixed in).
    pub fn actor_step(&mut self, batch: &NStepBatch) -> Result<()> {
        if let Mixer::Residual { burn_in, .. } = self.mixer {
            if self.train.env_steps < burn_in {
                return Ok(());
            }
        }
        let mut states = batch.states.clone();
        let mut bc_rows = Vec::new();
        let mut bc_actions = Array2::zeros((0, self.action_dim));
        if self.spec.auxbc {
            if self.spec.prefill {
                bc_rows = (0..batch.len()).filter(|&i| batch.sources[i] == Source::Offline).collect();
                bc_actions = batch.actions.select(Axis(0), &bc_rows);
            } else if let Some(off) = &self.offline {
                let extra = off.sample_transitions(batch.len().div_ceil(2), &mut self.train.rng)?;
                let rows = extra.len();
                let s = Array2::from_shape_vec((rows, self.agent_state_dim()), extra.iter().flat_map(|t| t.state.clone()).collect())
                    .map_err(|e| Error::config(e.to_string()))?;
                bc_actions = Array2::from_shape_vec((rows, self.action_dim), extra.iter().flat_map(|t| t.action.clone()).collect())
                    .map_err(|e| Error::config(e.to_string()))?;
                bc_rows = (states.nrows()..states.nrows() + rows).collect();
                states = concatenate(Axis(0), &[states.view(), s.view()]).map_err(|e| Error::config(e.to_string()))?;
            }
        }
        let base = match self.mixer {
            Mixer::Residual { .. } => self.prior_actions(states.view())?,
            _ => None,
        };
        let inputs = match &base {
            Some(a) => concat_cols(states.view(), a.view()),
            None => states.clone(),
        };
        let st = &mut self.train;
        let noise = st.actor.draw_noise(states.nrows(), &mut st.rng);
        let subset = st.critics.draw_subset(st.hyper.subset_size, &mut st.rng)?;
        let alpha = if st.base == BaseAlgo::Sac { st.hyper.alpha } else { 0.0 };
        let bc = (!bc_rows.is_empty()).then_some(BcTerm { rows: &bc_rows, actions: &bc_actions, alpha_bc: st.hyper.auxbc_alpha });
        let ab = ActorBatch { inputs: &inputs, states: &states, base: base.as_ref(), noise: &noise, alpha, bc };
        st.actor_update(&ab, &subset)?;
        Ok(())
    }
}

fn aview2_row(v: &[f64]) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((1, v.len()), v).expect("row view")
}

/// Copies `source` into a freshly initialized `fresh` of the same depth
/// whose first layer may be wider; `column_map[c]` names the source input
/// column for fresh column `c` (`None` keeps the fresh initialization).
fn partial_load(mut fresh: Mlp, source: &Mlp, column_map: &[Option<usize>]) -> Result<Mlp> {
    let fd = fresh.dims();
    let sd = source.dims();
    if fd.len() != sd.len() || fd[1..] != sd[1..] || column_map.len() != fd[0] {
        return Err(Error::config(format!("cannot load a {sd:?} network into {fd:?}")));
    }
    for (k, (dst, src)) in fresh.layers_mut().iter_mut().zip(source.layers()).enumerate() {
        if k > 0 {
            *dst = src.clone();
            continue;
        }
        dst.bias.assign(&src.bias);
        for (c, from) in column_map.iter().enumerate() {
            if let Some(f) = from {
                dst.weight.column_mut(c).assign(&src.weight.column(*f));
            }
        }
    }
    Ok(fresh)
}

fn load_policy(ckpt: &OfflineCheckpoint, base: BaseAlgo, component: &str) -> Result<Actor> {
    match (base, ckpt.actor.kind) {
        (BaseAlgo::Td3, _) => Ok(ckpt.actor.to_deterministic()),
        (BaseAlgo::Sac, PolicyKind::Stochastic) => Ok(ckpt.actor.clone()),
        (BaseAlgo::Sac, PolicyKind::Deterministic) => {
            Err(Error::config(format!("{component}: sac needs a stochastic pretrained policy, checkpoint is deterministic")))
        }
    }
}

/// Offline transitions for the data-use components: the dataset itself or
/// stochastic rollouts of the prior with the same transition count.
pub fn prefill_dataset(
    spec: &AgentSpec,
    env: &EnvSpec,
    dataset: Option<&TrajectoryDataset>,
    prior: Option<&Actor>,
    gamma: f64,
    seed: u64,
) -> Result<Option<TrajectoryDataset>> {
    if !spec.uses_data() {
        return Ok(None);
    }
    let ds = dataset.ok_or_else(|| Error::config("demos: prefill/auxbc need an offline dataset"))?;
    if ds.state_dim != env.state_dim || ds.action_dim != env.action_dim {
        return Err(Error::config(format!(
            "demos: dataset has n={} m={} but {} has n={} m={}",
            ds.state_dim, ds.action_dim, env.name, env.state_dim, env.action_dim
        )));
    }
    match spec.source {
        DataSource::Demos => Ok(Some(ds.clone())),
        DataSource::Rollouts => {
            let prior = prior.ok_or_else(|| Error::config("rollouts: no pretrained policy to roll out"))?;
            let r = policy_rollouts(env, prior, Collect::Transitions(ds.num_transitions()), gamma, derive_seed(seed, ROLLOUT_STREAM))?;
            Ok(Some(r.dataset))
        }
    }
}

/// Assembles the agent named by `spec` on `env`.
pub fn compose(spec: &AgentSpec, env: &EnvSpec, hyper: &Hyperparams, inputs: OfflineInputs<'_>, seed: u64) -> Result<Agent> {
    spec.validate()?;
    hyper.validate()?;
    let spec = spec.normalized();
    let (n, m) = (env.state_dim, env.action_dim);
    let cheq = spec.mixer == MixerKind::Cheq;
    let agent_n = n + usize::from(cheq);
    let num_critics = if spec.prefill { hyper.num_critics_prefill } else { hyper.num_critics };
    let utd = if spec.prefill { hyper.utd_prefill } else { hyper.utd };
    let kind = spec.base.policy_kind();
    let actor_hidden = hyper.hidden(hyper.actor_layers);
    let critic_hidden = hyper.hidden(hyper.critic_layers);
    let mut rng = rng_from_seed(derive_seed(seed, COMPOSE_STREAM));

    let component = spec.init.map(|i| i.name()).or(spec.mixer.name()).unwrap_or("rollouts");
    let ckpt = if spec.needs_offline_policy() {
        let c = inputs.checkpoint.ok_or_else(|| Error::config(format!("{component}: missing pretrained checkpoint")))?;
        if let Some(init) = spec.init {
            if c.provenance.method != init {
                return Err(Error::config(format!("{}: checkpoint was trained with {}", init.name(), c.provenance.method)));
            }
        }
        Some(c)
    } else {
        None
    };
    let prior = match ckpt {
        Some(c) => {
            let p = load_policy(c, spec.base, component)?;
            if p.state_dim() != n || p.action_dim() != m {
                return Err(Error::config(format!(
                    "{component}: checkpoint policy maps {} -> {}, env needs {n} -> {m}",
                    p.state_dim(),
                    p.action_dim()
                )));
            }
            Some(p)
        }
        None => None,
    };

    let actor = if spec.mixer == MixerKind::ResRl {
        let mut a = Actor::new(n + m, m, &actor_hidden, kind, &mut rng)?;
        a.net.zero_final_layer();
        a
    } else {
        let fresh = Actor::new(agent_n, m, &actor_hidden, kind, &mut rng)?;
        match (spec.init, &prior) {
            (Some(_), Some(p)) => {
                let map: Vec<Option<usize>> = (0..agent_n).map(|c| (c < n).then_some(c)).collect();
                let net = partial_load(fresh.net, &p.net, &map).map_err(|e| Error::config(format!("{component}: {e}")))?;
                Actor::from_net(net, kind)?
            }
            _ => fresh,
        }
    };

    let fresh_critics = CriticEnsemble::new(num_critics, agent_n, m, &critic_hidden, hyper.lr, &mut rng)?;
    let critics = match ckpt.and_then(|c| c.critics.as_ref()) {
        Some(nets) if spec.init.is_some() => {
            if nets.len() != num_critics {
                return Err(Error::config(format!(
                    "{component}: checkpoint has {} critics, agent needs {num_critics}",
                    nets.len()
                )));
            }
            // [s, (lambda), a] <- [s, a]
            let map: Vec<Option<usize>> = (0..agent_n + m)
                .map(|c| if c < n { Some(c) } else if c >= agent_n { Some(c - agent_n + n) } else { None })
                .collect();
            let loaded = fresh_critics
                .online
                .iter()
                .zip(nets)
                .map(|(f, src)| partial_load(f.clone(), src, &map))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::config(format!("{component}: {e}")))?;
            CriticEnsemble::from_nets(loaded, hyper.lr)?
        }
        _ => fresh_critics,
    };

    let bounds = CheqBounds { u: hyper.cheq_u_bounds, lambda: hyper.cheq_lambda_bounds };
    let mixer = match (spec.mixer, prior.clone()) {
        (MixerKind::None, _) => Mixer::None,
        (_, None) => unreachable!("mixers require a prior, checked above"),
        (MixerKind::Ibrl, Some(prior)) => Mixer::Ibrl { prior },
        (MixerKind::Cheq, Some(prior)) => Mixer::Cheq { prior, bounds },
        (MixerKind::ResRl, Some(prior)) => Mixer::Residual { prior, burn_in: hyper.resrl_burn_in },
    };

    let offline = prefill_dataset(&spec, env, inputs.dataset, prior.as_ref(), hyper.gamma, seed)?
        .map(|ds| {
            let ds = if cheq { ds.with_state_suffix(&[bounds.lambda[0]]) } else { ds };
            ds.to_buffer(ds.num_transitions())
        })
        .transpose()?;

    let warmup_steps = if spec.init.is_none() && spec.mixer == MixerKind::None { hyper.warmup_steps } else { 0 };
    let train = TrainState::new(spec.base, actor, critics, hyper.clone(), utd, rng_from_seed(derive_seed(seed, TRAIN_STREAM)));
    Ok(Agent {
        spec,
        train,
        mixer,
        online: ReplayBuffer::new(agent_n, m, hyper.buffer_capacity),
        offline,
        warmup_steps,
        env_state_dim: n,
        action_dim: m,
        explore_rng: rng_from_seed(derive_seed(seed, EXPLORE_STREAM)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demos::scripted_demos;
    use crate::pretrain::{pretrain, PretrainMethod, PretrainSpec};

    fn tiny() -> Hyperparams {
        Hyperparams { hidden_dim: 8, batch_size: 16, pretrain_steps: 5, ..Hyperparams::desk() }
    }

    fn reach() -> EnvSpec {
        EnvSpec::named("point-reach").unwrap()
    }

    fn demos() -> TrajectoryDataset {
        scripted_demos(&reach(), 4, 0.1, 0.8, 0).unwrap().dataset
    }

    fn ckpt(method: PretrainMethod, kind: PolicyKind, critics: usize) -> OfflineCheckpoint {
        pretrain(&PretrainSpec::new(method, kind, &tiny(), critics, 1), &demos()).unwrap()
    }

    #[test]
    fn all_off_is_plain_sac() {
        let a = compose(&AgentSpec::default(), &reach(), &tiny(), OfflineInputs::default(), 0).unwrap();
        assert!(matches!(a.mixer, Mixer::None));
        assert!(a.offline.is_none());
        assert_eq!(a.train.critics.len(), 2);
        assert_eq!(a.train.utd, 1);
        assert_eq!(a.warmup_steps, 1000);
    }

    #[test]
    fn bc_init_copies_policy() {
        let c = ckpt(PretrainMethod::Bc, PolicyKind::Stochastic, 2);
        let spec: AgentSpec = "sac+bc".parse().unwrap();
        let a = compose(&spec, &reach(), &tiny(), OfflineInputs { dataset: None, checkpoint: Some(&c) }, 0).unwrap();
        assert_eq!(a.train.actor.net, c.actor.net);
        assert_eq!(a.warmup_steps, 0);
    }

    #[test]
    fn cheq_partial_load_columns() {
        let c = ckpt(PretrainMethod::Bc, PolicyKind::Stochastic, 2);
        let spec: AgentSpec = "sac+bc+cheq".parse().unwrap();
        let a = compose(&spec, &reach(), &tiny(), OfflineInputs { dataset: None, checkpoint: Some(&c) }, 0).unwrap();
        let w = &a.train.actor.net.layers()[0].weight;
        let src = &c.actor.net.layers()[0].weight;
        assert_eq!(w.ncols(), 5);
        for col in 0..4 {
            assert_eq!(w.column(col), src.column(col));
        }
        assert_ne!(w.column(4).to_vec(), vec![0.0; w.nrows()]);
    }

    #[test]
    fn residual_starts_on_prior() {
        let c = ckpt(PretrainMethod::Bc, PolicyKind::Stochastic, 2);
        let spec: AgentSpec = "sac+resrl".parse().unwrap();
        let mut a = compose(&spec, &reach(), &tiny(), OfflineInputs { dataset: None, checkpoint: Some(&c) }, 0).unwrap();
        let s = [0.4, -0.3, 0.1, 0.0];
        let d = a.act(&s, 0.0, ActMode::Eval).unwrap();
        assert_eq!(d.action, c.actor.mean_action(&s).unwrap());
    }

    #[test]
    fn critic_count_mismatch_names_component() {
        let c = ckpt(PretrainMethod::Mcq, PolicyKind::Stochastic, 2);
        let spec: AgentSpec = "sac+demos+prefill+mcq".parse().unwrap();
        let d = demos();
        let err = compose(&spec, &reach(), &tiny(), OfflineInputs { dataset: Some(&d), checkpoint: Some(&c) }, 0).unwrap_err();
        assert!(err.to_string().contains("mcq"), "{err}");
    }

    #[test]
    fn missing_checkpoint_is_config_error() {
        let spec: AgentSpec = "sac+ibrl".parse().unwrap();
        let err = compose(&spec, &reach(), &tiny(), OfflineInputs::default(), 0).unwrap_err();
        assert!(matches!(err, Error::Config(_)) && err.to_string().contains("ibrl"));
    }

    #[test]
    fn recomposition_is_bit_identical() {
        let c = ckpt(PretrainMethod::CqlRho, PolicyKind::Stochastic, 5);
        let d = demos();
        let spec: AgentSpec = "sac+rollouts+prefill+cqlrho+cheq".parse().unwrap();
        let inputs = OfflineInputs { dataset: Some(&d), checkpoint: Some(&c) };
        let a = compose(&spec, &reach(), &tiny(), inputs, 3).unwrap();
        let b = compose(&spec, &reach(), &tiny(), inputs, 3).unwrap();
        assert_eq!(a.train.actor, b.train.actor);
        assert_eq!(a.train.critics.online, b.train.critics.online);
        let (oa, ob) = (a.offline.unwrap(), b.offline.unwrap());
        assert!(oa.iter().eq(ob.iter()));
        assert_eq!(oa.len(), d.num_transitions());
        assert_eq!(oa.state_dim(), 5);
    }
}
