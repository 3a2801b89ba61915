//! One training run: inputs from the cache, online training, and a run
//! directory holding the record, the resolved config and the final networks.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use demorl_core::compose::{compose, AgentSpec, OfflineInputs};
use demorl_core::metrics::RunRecord;
use demorl_core::pretrain::{OfflineCheckpoint, PretrainMethod, PretrainSpec};
use demorl_core::replay::TrajectoryDataset;
use demorl_core::rl::train_online;
use demorl_core::tensor::save_mlp;

use crate::cache::{replace_dir_atomic, Cache};
use crate::config::RunPlan;

pub const RECORD_FILE: &str = "record.txt";
pub const CONFIG_FILE: &str = "config.toml";
pub const INPUTS_FILE: &str = "inputs.txt";

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub record: RunRecord,
    /// `None` when the run needed no dataset.
    pub dataset_hit: Option<bool>,
    pub checkpoint_hit: Option<bool>,
    /// The directory already held this exact run; nothing was trained.
    pub reused: bool,
}

/// Critic count of the checkpoint a spec loads.
pub fn checkpoint_spec(plan: &RunPlan) -> PretrainSpec {
    let method = plan.spec.init.unwrap_or(PretrainMethod::Bc);
    let critics = if plan.spec.prefill { plan.hyper.num_critics_prefill } else { plan.hyper.num_critics };
    let mut spec = PretrainSpec::new(method, plan.spec.base.policy_kind(), &plan.hyper, critics, plan.seed);
    spec.steps = plan.pretrain_steps;
    spec
}

pub fn needs_dataset(spec: &AgentSpec) -> bool {
    spec.uses_data() || spec.needs_offline_policy()
}

/// The finished run in `dir`, if it was produced by exactly this plan.
pub fn existing_run(dir: &Path, plan: &RunPlan) -> Option<RunRecord> {
    let snap = fs::read_to_string(dir.join(CONFIG_FILE)).ok()?;
    if snap != plan.snapshot() {
        return None;
    }
    let record = RunRecord::load(&dir.join(RECORD_FILE)).ok()?;
    record.is_complete().then_some(record)
}

/// Runs `plan` into `<out>/<env>/<spec>/seed-<seed>`. A failed run leaves its
/// partial record behind and returns an error.
pub fn execute(plan: &RunPlan, out: &Path, cache: &Cache) -> Result<RunOutcome> {
    let dir = out.join(plan.dir_name());
    if let Some(record) = existing_run(&dir, plan) {
        log::info!("{}: up to date", dir.display());
        return Ok(RunOutcome { dir, record, dataset_hit: None, checkpoint_hit: None, reused: true });
    }

    let mut inputs = String::new();
    let mut dataset: Option<TrajectoryDataset> = None;
    let mut dataset_hit = None;
    if needs_dataset(&plan.spec) {
        let key = Cache::dataset_key(&plan.env, &plan.data, &plan.hyper)?;
        let (ds, hit) = cache.dataset(&plan.env, &plan.data, &plan.hyper)?;
        inputs.push_str(&format!("dataset = {key}\ndataset_cached = {hit}\n"));
        dataset = Some(ds);
        dataset_hit = Some(hit);
    }
    let mut checkpoint: Option<OfflineCheckpoint> = None;
    let mut checkpoint_hit = None;
    if plan.spec.needs_offline_policy() {
        let ds = dataset.as_ref().expect("loaded above");
        let spec = checkpoint_spec(plan);
        let (ck, hit) = cache.checkpoint(ds, &spec)?;
        inputs.push_str(&format!("checkpoint = {}\ncheckpoint_cached = {hit}\n", Cache::checkpoint_key(ds, &spec)));
        checkpoint = Some(ck);
        checkpoint_hit = Some(hit);
    }

    let offline = OfflineInputs { dataset: dataset.as_ref(), checkpoint: checkpoint.as_ref() };
    let mut agent = compose(&plan.spec, &plan.env, &plan.hyper, offline, plan.seed).map_err(|e| anyhow!("{}: {e}", plan.spec))?;
    let result = train_online(&mut agent, &plan.env, plan.budget, plan.seed);
    let (record, failure) = match result {
        Ok(record) => (record, None),
        Err(f) => (f.record, Some(f.error)),
    };

    fs::create_dir_all(dir.parent().expect("nested run dir"))?;
    replace_dir_atomic(&dir, |tmp| {
        record.save(&tmp.join(RECORD_FILE))?;
        fs::write(tmp.join(CONFIG_FILE), plan.snapshot())?;
        fs::write(tmp.join(INPUTS_FILE), &inputs)?;
        if failure.is_none() {
            save_mlp(&tmp.join("actor.mlp"), &agent.train.actor.net)?;
            for (k, c) in agent.train.critics.online.iter().enumerate() {
                save_mlp(&tmp.join(format!("critic-{k}.mlp")), c)?;
            }
        }
        Ok(())
    })
    .with_context(|| format!("writing run directory {}", dir.display()))?;

    if let Some(e) = failure {
        return Err(anyhow!("{} failed after {} points: {e}", dir.display(), record.points.len()));
    }
    log::info!("{}: final success {:?}", dir.display(), record.final_success());
    Ok(RunOutcome { dir, record, dataset_hit, checkpoint_hit, reused: false })
}
