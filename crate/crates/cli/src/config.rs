//! Experiment configuration files (TOML).
//!
//! ```toml
//! [run]
//! env = "point-reach"
//! seed = 0
//! budget = 10000
//! preset = "desk"          # hyperparameter preset: desk | full
//!
//! [agent]
//! spec = "sac+demos+prefill+bc"
//! # or field by field:
//! # base = "sac"; source = "demos"; prefill = true; auxbc = false
//! # init = "bc"; mixer = "none"
//!
//! [data]
//! kind = "scripted"        # scripted | expert | file
//! episodes = 100
//!
//! [hyper]                  # overrides of the preset, by field name
//! batch_size = 256
//! ```
//!
//! A sweep file replaces `[run]` and `[agent]` with a `[sweep]` table listing
//! `envs`, `agents`, `seeds` and `budget`.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use demorl_core::compose::{AgentSpec, DataSource, MixerKind};
use demorl_core::envs::EnvSpec;
use demorl_core::pretrain::PretrainMethod;
use demorl_core::rl::{BaseAlgo, Hyperparams};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub spec: Option<String>,
    pub base: Option<String>,
    pub source: Option<String>,
    pub prefill: Option<bool>,
    pub auxbc: Option<bool>,
    pub init: Option<String>,
    pub mixer: Option<String>,
}

impl AgentSection {
    pub fn resolve(&self) -> Result<AgentSpec> {
        let structured = self.base.is_some()
            || self.source.is_some()
            || self.prefill.is_some()
            || self.auxbc.is_some()
            || self.init.is_some()
            || self.mixer.is_some();
        if let Some(text) = &self.spec {
            if structured {
                bail!("agent.spec: give either a spec string or the individual fields, not both");
            }
            return text.parse().map_err(|e| anyhow!("agent.spec: {e}"));
        }
        let base = match self.base.as_deref().unwrap_or("sac") {
            "sac" => BaseAlgo::Sac,
            "td3" => BaseAlgo::Td3,
            other => bail!("agent.base: unknown base algorithm '{other}' (expected sac or td3)"),
        };
        let source = match self.source.as_deref().unwrap_or("demos") {
            "demos" => DataSource::Demos,
            "rollouts" => DataSource::Rollouts,
            other => bail!("agent.source: unknown data source '{other}' (expected demos or rollouts)"),
        };
        let init = match self.init.as_deref().unwrap_or("none") {
            "none" => None,
            other => Some(
                other
                    .parse::<PretrainMethod>()
                    .map_err(|_| anyhow!("agent.init: unknown initialization '{other}' (expected none, bc, mcq, calql, cqlrho or cqlh)"))?,
            ),
        };
        let mixer = match self.mixer.as_deref().unwrap_or("none") {
            "none" => MixerKind::None,
            "ibrl" => MixerKind::Ibrl,
            "cheq" => MixerKind::Cheq,
            "resrl" => MixerKind::ResRl,
            other => bail!("agent.mixer: unknown mixer '{other}' (expected none, ibrl, cheq or resrl)"),
        };
        let spec = AgentSpec { base, source, prefill: self.prefill.unwrap_or(false), auxbc: self.auxbc.unwrap_or(false), init, mixer };
        spec.validate().map_err(|e| anyhow!("agent: {e}"))?;
        Ok(spec.normalized())
    }
}

/// Where the offline dataset comes from.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// `scripted` controller with action noise, a trained SAC `expert`
    /// filtered by return, or a dataset `file`.
    pub kind: String,
    pub episodes: usize,
    pub noise: f64,
    pub seed: u64,
    pub expert_budget: u64,
    pub filter: f64,
    pub path: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { kind: "scripted".into(), episodes: 100, noise: 0.1, seed: 0, expert_budget: 50_000, filter: 0.9, path: None }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<()> {
        match self.kind.as_str() {
            "scripted" | "expert" => {}
            "file" if self.path.is_some() => {}
            "file" => bail!("data.path: required when data.kind = \"file\""),
            other => bail!("data.kind: unknown dataset kind '{other}' (expected scripted, expert or file)"),
        }
        if self.episodes == 0 && self.kind == "scripted" {
            bail!("data.episodes: must be positive");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            bail!("data.noise: must be a non-negative number");
        }
        if !(0.0..=1.0).contains(&self.filter) {
            bail!("data.filter: must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainSection {
    pub steps: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    env: String,
    #[serde(default)]
    seed: u64,
    budget: u64,
    #[serde(default = "default_preset")]
    preset: String,
}

fn default_preset() -> String {
    "desk".into()
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFile {
    run: RunSection,
    #[serde(default)]
    agent: AgentSection,
    #[serde(default)]
    data: DataConfig,
    #[serde(default)]
    pretrain: PretrainSection,
    #[serde(default)]
    hyper: toml::Table,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    envs: Vec<String>,
    #[serde(default)]
    agents: Vec<String>,
    /// Adds every valid spec on these base algorithms.
    #[serde(default)]
    lattice: Vec<String>,
    seeds: Vec<u64>,
    budget: u64,
    #[serde(default = "default_preset")]
    preset: String,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    sweep: SweepSection,
    #[serde(default)]
    data: DataConfig,
    #[serde(default)]
    pretrain: PretrainSection,
    #[serde(default)]
    hyper: toml::Table,
}

/// Everything one training run needs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunPlan {
    pub env: EnvSpec,
    pub spec: AgentSpec,
    pub seed: u64,
    pub budget: u64,
    pub hyper: Hyperparams,
    pub data: DataConfig,
    pub pretrain_steps: usize,
}

impl RunPlan {
    /// Resolved configuration as written into the run directory.
    pub fn snapshot(&self) -> String {
        #[derive(Serialize)]
        struct Snap<'a> {
            run: SnapRun<'a>,
            agent: SnapAgent,
            data: &'a DataConfig,
            pretrain: SnapPretrain,
            hyper: &'a Hyperparams,
        }
        #[derive(Serialize)]
        struct SnapRun<'a> {
            env: &'a str,
            seed: u64,
            budget: u64,
        }
        #[derive(Serialize)]
        struct SnapAgent {
            spec: String,
        }
        #[derive(Serialize)]
        struct SnapPretrain {
            steps: usize,
        }
        let snap = Snap {
            run: SnapRun { env: &self.env.name, seed: self.seed, budget: self.budget },
            agent: SnapAgent { spec: self.spec.to_string() },
            data: &self.data,
            pretrain: SnapPretrain { steps: self.pretrain_steps },
            hyper: &self.hyper,
        };
        toml::to_string(&snap).expect("plain data serializes")
    }

    /// Relative run directory `<env>/<spec>/seed-<seed>`.
    pub fn dir_name(&self) -> PathBuf {
        Path::new(&self.env.name).join(self.spec.to_string()).join(format!("seed-{}", self.seed))
    }
}

fn hyper_from(preset: &str, overrides: &toml::Table) -> Result<Hyperparams> {
    let base = Hyperparams::preset(preset).map_err(|e| anyhow!("run.preset: {e}"))?;
    let mut table = toml::Table::try_from(&base).context("hyperparameter preset")?;
    for (k, v) in overrides {
        if !table.contains_key(k) {
            bail!("hyper.{k}: unknown hyperparameter");
        }
        table.insert(k.clone(), v.clone());
    }
    let hyper: Hyperparams = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| anyhow!("hyper: {}", e.message()))?;
    hyper.validate().map_err(|e| anyhow!("{e}"))?;
    Ok(hyper)
}

fn env_named(name: &str, field: &str) -> Result<EnvSpec> {
    EnvSpec::named(name).map_err(|e| anyhow!("{field}: {e}"))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))
}

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| anyhow!("{}: {}", path.display(), e.to_string().trim_end()))
}

pub fn load_run(path: &Path) -> Result<RunPlan> {
    parse_run(&read(path)?, path)
}

pub fn parse_run(text: &str, path: &Path) -> Result<RunPlan> {
    let f: RunFile = parse_toml(text, path)?;
    let hyper = hyper_from(&f.run.preset, &f.hyper)?;
    f.data.validate()?;
    Ok(RunPlan {
        env: env_named(&f.run.env, "run.env")?,
        spec: f.agent.resolve()?,
        seed: f.run.seed,
        budget: f.run.budget,
        pretrain_steps: f.pretrain.steps.unwrap_or(hyper.pretrain_steps),
        hyper,
        data: f.data,
    })
}

/// A sweep expanded into cells, with the entries that were skipped or
/// rewritten.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPlan {
    pub cells: Vec<RunPlan>,
    pub notes: Vec<String>,
}

/// Parses an agent entry of a sweep. A spec naming both `mcq` and `bc` is
/// rewritten to `mcq`, whose checkpoint already carries a cloned actor.
pub fn sweep_agent(entry: &str) -> std::result::Result<(AgentSpec, Option<String>), String> {
    let tokens: Vec<&str> = entry.split('+').map(str::trim).collect();
    if tokens.contains(&"mcq") && tokens.contains(&"bc") {
        let fixed: Vec<&str> = tokens.into_iter().filter(|t| *t != "bc").collect();
        let spec: AgentSpec = fixed.join("+").parse().map_err(|e| format!("{entry}: {e}"))?;
        return Ok((spec, Some(format!("{entry}: mcq already initializes the actor by cloning; using {spec}"))));
    }
    entry.parse().map(|s| (s, None)).map_err(|e| format!("{entry}: {e}"))
}

pub fn load_sweep(path: &Path) -> Result<SweepPlan> {
    parse_sweep(&read(path)?, path)
}

pub fn parse_sweep(text: &str, path: &Path) -> Result<SweepPlan> {
    let f: SweepFile = parse_toml(text, path)?;
    let hyper = hyper_from(&f.sweep.preset, &f.hyper)?;
    f.data.validate()?;
    if f.sweep.envs.is_empty() || f.sweep.seeds.is_empty() {
        bail!("sweep: envs and seeds must be non-empty");
    }
    let mut notes = Vec::new();
    let mut specs: Vec<AgentSpec> = Vec::new();
    for entry in &f.sweep.agents {
        match sweep_agent(entry) {
            Ok((spec, note)) => {
                notes.extend(note);
                if !specs.contains(&spec) {
                    specs.push(spec);
                }
            }
            Err(reason) => notes.push(format!("skipped {reason}")),
        }
    }
    for base in &f.sweep.lattice {
        let base = match base.as_str() {
            "sac" => BaseAlgo::Sac,
            "td3" => BaseAlgo::Td3,
            other => bail!("sweep.lattice: unknown base algorithm '{other}'"),
        };
        for spec in AgentSpec::lattice(base) {
            if !specs.contains(&spec) {
                specs.push(spec);
            }
        }
    }
    if specs.is_empty() {
        bail!("sweep.agents: no valid agent");
    }
    let mut cells = Vec::new();
    for env in &f.sweep.envs {
        let env = env_named(env, "sweep.envs")?;
        for spec in &specs {
            for &seed in &f.sweep.seeds {
                cells.push(RunPlan {
                    env: env.clone(),
                    spec: *spec,
                    seed,
                    budget: f.sweep.budget,
                    hyper: hyper.clone(),
                    data: f.data.clone(),
                    pretrain_steps: f.pretrain.steps.unwrap_or(hyper.pretrain_steps),
                });
            }
        }
    }
    Ok(SweepPlan { cells, notes })
}
