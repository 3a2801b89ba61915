//! Offline extraction of a policy and (optionally) a critic ensemble from a
//! trajectory dataset.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::losses::{actor_loss, bc_loss, cql_critic_loss, critic_regression, ActorBatch, CqlBatch, PushDown};
use crate::replay::TrajectoryDataset;
use crate::rl::{Actor, CriticEnsemble, Hyperparams, PolicyKind};
use crate::rng::{derive_seed, rng_from_seed, SimRng};
use crate::tensor::{load_mlp, save_mlp, AdamState, Mlp};

const PRETRAIN_STREAM: u64 = 0x5052_4554;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PretrainMethod {
    Bc,
    Mcq,
    CqlH,
    CqlRho,
    CalQl,
}

impl PretrainMethod {
    pub const ALL: [PretrainMethod; 5] = [Self::Bc, Self::Mcq, Self::CqlH, Self::CqlRho, Self::CalQl];

    pub fn name(self) -> &'static str {
        match self {
            Self::Bc => "bc",
            Self::Mcq => "mcq",
            Self::CqlH => "cqlh",
            Self::CqlRho => "cqlrho",
            Self::CalQl => "calql",
        }
    }

    pub fn has_critics(self) -> bool {
        self != Self::Bc
    }

    fn push_down(self) -> Option<PushDown> {
        match self {
            Self::CqlH => Some(PushDown::H),
            Self::CqlRho => Some(PushDown::Rho),
            Self::CalQl => Some(PushDown::CalQl),
            _ => None,
        }
    }
}

impl fmt::Display for PretrainMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PretrainMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bc" => Ok(Self::Bc),
            "mcq" => Ok(Self::Mcq),
            "cqlh" | "cql-h" => Ok(Self::CqlH),
            "cqlrho" | "cql-rho" => Ok(Self::CqlRho),
            "calql" => Ok(Self::CalQl),
            other => Err(Error::config(format!("unknown pretraining method '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PretrainSpec {
    pub method: PretrainMethod,
    pub steps: usize,
    pub batch_size: usize,
    /// Kind of the behavior-cloned actor (`bc`, `mcq`). Conservative methods
    /// always learn a stochastic actor.
    pub policy: PolicyKind,
    pub gamma: f64,
    pub alpha: f64,
    pub tau: f64,
    pub lr: f64,
    /// Actor learning rate of the conservative methods.
    pub actor_lr: f64,
    pub cql_weight: f64,
    pub cql_samples: usize,
    pub mcq_eps: f64,
    pub num_critics: usize,
    pub subset_size: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub seed: u64,
}

impl PretrainSpec {
    pub fn new(method: PretrainMethod, policy: PolicyKind, hyper: &Hyperparams, num_critics: usize, seed: u64) -> Self {
        PretrainSpec {
            method,
            steps: hyper.pretrain_steps,
            batch_size: hyper.batch_size,
            policy,
            gamma: hyper.gamma,
            alpha: hyper.alpha,
            tau: hyper.tau,
            lr: hyper.lr,
            actor_lr: hyper.cql_actor_lr,
            cql_weight: hyper.cql_weight,
            cql_samples: hyper.cql_samples,
            mcq_eps: hyper.mcq_bootstrap_eps,
            num_critics,
            subset_size: hyper.subset_size,
            actor_hidden: hyper.hidden(hyper.actor_layers),
            critic_hidden: hyper.hidden(hyper.critic_layers),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub method: PretrainMethod,
    pub steps: usize,
    pub seed: u64,
    pub dataset_hash: String,
    /// Gradient steps that used a TD target instead of the return (MCQ).
    pub td_steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OfflineCheckpoint {
    pub actor: Actor,
    pub critics: Option<Vec<Mlp>>,
    pub provenance: Provenance,
}

impl OfflineCheckpoint {
    /// Writes `actor.mlp`, `critic-<k>.mlp` and `provenance.txt` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        save_mlp(&dir.join("actor.mlp"), &self.actor.net)?;
        let critics = self.critics.as_deref().unwrap_or(&[]);
        for (k, c) in critics.iter().enumerate() {
            save_mlp(&dir.join(format!("critic-{k}.mlp")), c)?;
        }
        let p = &self.provenance;
        let kind = match self.actor.kind {
            PolicyKind::Stochastic => "stochastic",
            PolicyKind::Deterministic => "deterministic",
        };
        let text = format!(
            "method = {}\nkind = {kind}\nsteps = {}\nseed = {}\ndataset = {}\ncritics = {}\ntd_steps = {}\n",
            p.method,
            p.steps,
            p.seed,
            p.dataset_hash,
            critics.len(),
            p.td_steps
        );
        fs::write(dir.join("provenance.txt"), text)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join("provenance.txt"))?;
        let field = |key: &str| -> Result<&str> {
            text.lines()
                .filter_map(|l| l.split_once('='))
                .find(|(k, _)| k.trim() == key)
                .map(|(_, v)| v.trim())
                .ok_or_else(|| Error::config(format!("{}: provenance lacks '{key}'", dir.display())))
        };
        let num = |key: &str| -> Result<u64> {
            field(key)?.parse().map_err(|_| Error::config(format!("{}: bad provenance '{key}'", dir.display())))
        };
        let kind = match field("kind")? {
            "stochastic" => PolicyKind::Stochastic,
            "deterministic" => PolicyKind::Deterministic,
            other => return Err(Error::config(format!("unknown policy kind '{other}'"))),
        };
        let actor = Actor::from_net(load_mlp(&dir.join("actor.mlp"))?, kind)?;
        let n = num("critics")? as usize;
        let critics = if n == 0 {
            None
        } else {
            Some((0..n).map(|k| load_mlp(&dir.join(format!("critic-{k}.mlp")))).collect::<Result<Vec<_>>>()?)
        };
        let provenance = Provenance {
            method: field("method")?.parse()?,
            steps: num("steps")? as usize,
            seed: num("seed")?,
            dataset_hash: field("dataset")?.to_string(),
            td_steps: num("td_steps")? as usize,
        };
        Ok(OfflineCheckpoint { actor, critics, provenance })
    }
}

/// Column-major view of a dataset for minibatch gathering.
struct Table {
    states: Array2<f64>,
    actions: Array2<f64>,
    rewards: Vec<f64>,
    next_states: Array2<f64>,
    terminal: Vec<bool>,
    returns: Vec<f64>,
}

struct Rows {
    states: Array2<f64>,
    actions: Array2<f64>,
    rewards: Vec<f64>,
    next_states: Array2<f64>,
    terminal: Vec<bool>,
    returns: Vec<f64>,
}

impl Table {
    fn new(ds: &TrajectoryDataset, gamma: f64) -> Result<Self> {
        ds.validate()?;
        if ds.is_empty() {
            return Err(Error::config("offline dataset is empty"));
        }
        let rows = ds.num_transitions();
        let (n, m) = (ds.state_dim, ds.action_dim);
        let mut t = Table {
            states: Array2::zeros((rows, n)),
            actions: Array2::zeros((rows, m)),
            rewards: Vec::with_capacity(rows),
            next_states: Array2::zeros((rows, n)),
            terminal: Vec::with_capacity(rows),
            returns: ds.mc_returns(gamma)?,
        };
        for (i, tr) in ds.transitions().enumerate() {
            t.states.row_mut(i).assign(&ndarray::aview1(&tr.state));
            t.actions.row_mut(i).assign(&ndarray::aview1(&tr.action));
            t.next_states.row_mut(i).assign(&ndarray::aview1(&tr.next_state));
            t.rewards.push(tr.reward);
            t.terminal.push(tr.terminal);
        }
        Ok(t)
    }

    fn len(&self) -> usize {
        self.rewards.len()
    }

    fn gather(&self, idx: &[usize]) -> Rows {
        Rows {
            states: self.states.select(Axis(0), idx),
            actions: self.actions.select(Axis(0), idx),
            rewards: idx.iter().map(|&i| self.rewards[i]).collect(),
            next_states: self.next_states.select(Axis(0), idx),
            terminal: idx.iter().map(|&i| self.terminal[i]).collect(),
            returns: idx.iter().map(|&i| self.returns[i]).collect(),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Rows {
        let idx: Vec<usize> = (0..batch).map(|_| rng.random_range(0..self.len())).collect();
        self.gather(&idx)
    }
}

/// Behavior cloning with Adam over reshuffled epochs.
struct BcLearner {
    actor: Actor,
    optim: AdamState,
    order: Vec<usize>,
    cursor: usize,
}

impl BcLearner {
    fn new(actor: Actor, lr: f64, rows: usize) -> Self {
        let optim = AdamState::new(&actor.net, lr);
        BcLearner { actor, optim, order: (0..rows).collect(), cursor: rows }
    }

    fn step(&mut self, table: &Table, batch: usize, rng: &mut SimRng) -> Result<f64> {
        let batch = batch.min(self.order.len());
        if self.cursor + batch > self.order.len() {
            self.order.shuffle(rng);
            self.cursor = 0;
        }
        let rows = table.gather(&self.order[self.cursor..self.cursor + batch]);
        self.cursor += batch;
        let (loss, grads) = bc_loss(&self.actor, &rows.states, None, &rows.actions)?;
        self.optim.step(&mut self.actor.net, &grads)?;
        Ok(loss)
    }
}

fn fresh_actor(spec: &PretrainSpec, ds: &TrajectoryDataset, kind: PolicyKind, rng: &mut SimRng) -> Result<Actor> {
    Actor::new(ds.state_dim, ds.action_dim, &spec.actor_hidden, kind, rng)
}

/// Behavior cloning alone.
pub fn bc_train(ds: &TrajectoryDataset, spec: &PretrainSpec) -> Result<OfflineCheckpoint> {
    let table = Table::new(ds, spec.gamma)?;
    let mut rng = rng_from_seed(derive_seed(spec.seed, PRETRAIN_STREAM));
    let actor = fresh_actor(spec, ds, spec.policy, &mut rng)?;
    let mut bc = BcLearner::new(actor, spec.lr, table.len());
    for _ in 0..spec.steps {
        bc.step(&table, spec.batch_size, &mut rng)?;
    }
    Ok(OfflineCheckpoint { actor: bc.actor, critics: None, provenance: provenance(spec, ds, 0) })
}

fn provenance(spec: &PretrainSpec, ds: &TrajectoryDataset, td_steps: usize) -> Provenance {
    Provenance { method: spec.method, steps: spec.steps, seed: spec.seed, dataset_hash: ds.content_hash(), td_steps }
}

/// One-step soft target `r + gamma (1 - done) (min_Z Qbar(s', a') - alpha log pi)`
/// with `a' ~ actor`. `alpha = 0` drops the entropy term.
fn one_step_targets(rows: &Rows, critics: &CriticEnsemble, actor: &Actor, spec: &PretrainSpec, alpha: f64, rng: &mut SimRng) -> Result<Vec<f64>> {
    let subset = critics.draw_subset(spec.subset_size.min(critics.len()), rng)?;
    let next = actor.sample_actions(rows.next_states.view(), rng)?;
    let q = critics.q_min(rows.next_states.view(), next.actions.view(), &subset, true)?;
    Ok((0..rows.rewards.len())
        .map(|i| {
            if rows.terminal[i] {
                rows.rewards[i]
            } else {
                rows.rewards[i] + spec.gamma * (q[i] - alpha * next.log_probs[i])
            }
        })
        .collect())
}

/// Critics regress onto returns, or (with probability `mcq_eps`) onto a
/// one-step TD target; a BC actor trains alongside.
pub fn mcq_train(ds: &TrajectoryDataset, spec: &PretrainSpec) -> Result<OfflineCheckpoint> {
    let table = Table::new(ds, spec.gamma)?;
    let mut rng = rng_from_seed(derive_seed(spec.seed, PRETRAIN_STREAM));
    let actor = fresh_actor(spec, ds, spec.policy, &mut rng)?;
    let mut critics = CriticEnsemble::new(spec.num_critics, ds.state_dim, ds.action_dim, &spec.critic_hidden, spec.lr, &mut rng)?;
    let mut bc = BcLearner::new(actor, spec.lr, table.len());
    let mut td_steps = 0;
    for _ in 0..spec.steps {
        let rows = table.sample(spec.batch_size, &mut rng);
        let targets = if rng.random::<f64>() < spec.mcq_eps {
            td_steps += 1;
            one_step_targets(&rows, &critics, &bc.actor, spec, 0.0, &mut rng)?
        } else {
            rows.returns.clone()
        };
        for k in 0..critics.len() {
            let (_, g) = critic_regression(&critics.online[k], &rows.states, &rows.actions, &targets)?;
            critics.step(k, &g)?;
        }
        critics.update_targets(spec.tau)?;
        bc.step(&table, spec.batch_size, &mut rng)?;
    }
    Ok(OfflineCheckpoint { actor: bc.actor, critics: Some(critics.online), provenance: provenance(spec, ds, td_steps) })
}

fn uniform_actions(rows: usize, m: usize, rng: &mut SimRng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, m), || rng.random_range(-1.0..1.0))
}

/// Conservative critics (H, rho or calibrated push-down) alternating with a
/// soft actor update.
fn conservative_train(ds: &TrajectoryDataset, spec: &PretrainSpec, variant: PushDown) -> Result<OfflineCheckpoint> {
    let table = Table::new(ds, spec.gamma)?;
    let mut rng = rng_from_seed(derive_seed(spec.seed, PRETRAIN_STREAM));
    let mut actor = fresh_actor(spec, ds, PolicyKind::Stochastic, &mut rng)?;
    let mut critics = CriticEnsemble::new(spec.num_critics, ds.state_dim, ds.action_dim, &spec.critic_hidden, spec.lr, &mut rng)?;
    let mut actor_optim = AdamState::new(&actor.net, spec.actor_lr);
    let k = spec.cql_samples.max(1);
    let m = ds.action_dim;
    for _ in 0..spec.steps {
        let rows = table.sample(spec.batch_size, &mut rng);
        let b = rows.rewards.len();
        let targets = one_step_targets(&rows, &critics, &actor, spec, spec.alpha, &mut rng)?;
        let repeated = concatenate(Axis(0), &vec![rows.states.view(); k]).expect("same widths");
        let draws = actor.sample_actions(repeated.view(), &mut rng)?;
        let policy_actions: Vec<Array2<f64>> = (0..k).map(|j| draws.actions.slice(ndarray::s![j * b..(j + 1) * b, ..]).to_owned()).collect();
        let policy_log_probs: Vec<Vec<f64>> = (0..k).map(|j| draws.log_probs[j * b..(j + 1) * b].to_vec()).collect();
        let uniform: Vec<Array2<f64>> = if variant == PushDown::H { (0..k).map(|_| uniform_actions(b, m, &mut rng)).collect() } else { Vec::new() };
        let batch = CqlBatch {
            states: &rows.states,
            actions: &rows.actions,
            targets: &targets,
            policy_actions: &policy_actions,
            policy_log_probs: &policy_log_probs,
            uniform_actions: &uniform,
            returns: Some(&rows.returns),
        };
        for c in 0..critics.len() {
            let (_, g) = cql_critic_loss(&critics.online[c], &batch, variant, spec.cql_weight)?;
            critics.step(c, &g)?;
        }
        critics.update_targets(spec.tau)?;

        let subset = critics.draw_subset(spec.subset_size.min(critics.len()), &mut rng)?;
        let noise = actor.draw_noise(b, &mut rng);
        let nets: Vec<&Mlp> = subset.iter().map(|&c| &critics.online[c]).collect();
        let ab = ActorBatch { inputs: &rows.states, states: &rows.states, base: None, noise: &noise, alpha: spec.alpha, bc: None };
        let out = actor_loss(&actor, &nets, &ab)?;
        actor_optim.step(&mut actor.net, &out.grads)?;
    }
    Ok(OfflineCheckpoint { actor, critics: Some(critics.online), provenance: provenance(spec, ds, 0) })
}

/// Runs the method named in `spec`.
pub fn pretrain(spec: &PretrainSpec, ds: &TrajectoryDataset) -> Result<OfflineCheckpoint> {
    if spec.batch_size == 0 {
        return Err(Error::config("pretraining batch size must be positive"));
    }
    match spec.method {
        PretrainMethod::Bc => bc_train(ds, spec),
        PretrainMethod::Mcq => mcq_train(ds, spec),
        other => conservative_train(ds, spec, other.push_down().expect("conservative method")),
    }
}
