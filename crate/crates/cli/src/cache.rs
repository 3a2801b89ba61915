//! Content-addressed store of offline datasets and pretrained checkpoints.
//!
//! Layout under the cache root:
//!
//! ```text
//! datasets/<sha256>.txt
//! checkpoints/<sha256>/{actor.mlp, critic-<k>.mlp, provenance.txt}
//! ```
//!
//! Keys hash everything that determines the artifact, so a hit can be used
//! as is. Entries are written under a temporary name and renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use demorl_core::demos::{filter_episodes, scripted_demos, train_expert};
use demorl_core::envs::EnvSpec;
use demorl_core::pretrain::{pretrain, OfflineCheckpoint, PretrainSpec};
use demorl_core::replay::TrajectoryDataset;
use demorl_core::rl::Hyperparams;
use sha2::{Digest, Sha256};

use crate::config::DataConfig;

pub const CACHE_ENV: &str = "DEMORL_CACHE";

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tid = format!("{:?}", std::thread::current().id()).replace(|c: char| !c.is_ascii_alphanumeric(), "");
    path.with_file_name(format!(".{name}.tmp-{}-{tid}", std::process::id()))
}

/// Writes `contents` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let tmp = temp_sibling(path);
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Fills a fresh directory through `fill` and moves it to `dir`, replacing
/// whatever was there.
pub fn replace_dir_atomic(dir: &Path, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let tmp = temp_sibling(dir);
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    fs::create_dir_all(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    fill(&tmp)?;
    if dir.exists() {
        fs::remove_dir_all(dir).with_context(|| format!("removing old {}", dir.display()))?;
    }
    fs::rename(&tmp, dir).with_context(|| format!("renaming into {}", dir.display()))?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Cache {
    pub root: PathBuf,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Cache { root: root.into() }
    }

    /// `$DEMORL_CACHE`, or `<out>/.cache`.
    pub fn from_env(out: &Path) -> Self {
        match std::env::var_os(CACHE_ENV) {
            Some(dir) if !dir.is_empty() => Cache::new(dir),
            _ => Cache::new(out.join(".cache")),
        }
    }

    pub fn dataset_key(env: &EnvSpec, data: &DataConfig, hyper: &Hyperparams) -> Result<String> {
        let mut text = format!("dataset\nenv = {env:?}\ndata = {data:?}\ngamma = {:?}\n", hyper.gamma);
        match data.kind.as_str() {
            "expert" => text.push_str(&format!("hyper = {}\n", serde_json::to_string(hyper)?)),
            "file" => {
                let path = data.path.as_ref().expect("validated");
                let bytes = fs::read(path).with_context(|| format!("reading dataset {}", path.display()))?;
                text.push_str(&format!("file = {}\n", hex::encode(Sha256::digest(&bytes))));
            }
            _ => {}
        }
        Ok(sha256_hex(&text))
    }

    pub fn dataset_path(&self, key: &str) -> PathBuf {
        self.root.join("datasets").join(format!("{key}.txt"))
    }

    /// The dataset described by `data`, and whether it came from the cache.
    pub fn dataset(&self, env: &EnvSpec, data: &DataConfig, hyper: &Hyperparams) -> Result<(TrajectoryDataset, bool)> {
        let key = Self::dataset_key(env, data, hyper)?;
        let path = self.dataset_path(&key);
        if path.exists() {
            let ds = TrajectoryDataset::load(&path).with_context(|| format!("cached dataset {}", path.display()))?;
            return Ok((ds, true));
        }
        let ds = build_dataset(env, data, hyper)?;
        write_atomic(&path, &ds.to_text())?;
        log::info!("dataset {} ({} episodes) -> {}", data.kind, ds.episodes.len(), path.display());
        Ok((ds, false))
    }

    pub fn checkpoint_key(dataset: &TrajectoryDataset, spec: &PretrainSpec) -> String {
        sha256_hex(&format!("checkpoint\ndataset = {}\nspec = {spec:?}\n", dataset.content_hash()))
    }

    pub fn checkpoint_dir(&self, key: &str) -> PathBuf {
        self.root.join("checkpoints").join(key)
    }

    /// The checkpoint `spec` trains on `dataset`, and whether it was cached.
    pub fn checkpoint(&self, dataset: &TrajectoryDataset, spec: &PretrainSpec) -> Result<(OfflineCheckpoint, bool)> {
        let dir = self.checkpoint_dir(&Self::checkpoint_key(dataset, spec));
        if dir.join("provenance.txt").exists() {
            let ck = OfflineCheckpoint::load(&dir).with_context(|| format!("cached checkpoint {}", dir.display()))?;
            return Ok((ck, true));
        }
        let ck = pretrain(spec, dataset)?;
        fs::create_dir_all(dir.parent().expect("has parent"))?;
        replace_dir_atomic(&dir, |tmp| Ok(ck.save(tmp)?))?;
        log::info!("pretrained {} ({} steps) -> {}", spec.method, spec.steps, dir.display());
        Ok((ck, false))
    }
}

/// Produces the dataset without consulting the cache.
pub fn build_dataset(env: &EnvSpec, data: &DataConfig, hyper: &Hyperparams) -> Result<TrajectoryDataset> {
    data.validate()?;
    let ds = match data.kind.as_str() {
        "scripted" => scripted_demos(env, data.episodes, data.noise, hyper.gamma, data.seed)?.dataset,
        "expert" => {
            let run = train_expert(env, data.expert_budget, hyper, data.seed)?;
            let mut kept = filter_episodes(&run.log, data.filter)?;
            if data.episodes > 0 && kept.episodes.len() > data.episodes {
                // the latest episodes come from the most trained policy
                kept.episodes.drain(..kept.episodes.len() - data.episodes);
            }
            kept
        }
        "file" => {
            let path = data.path.as_ref().expect("validated");
            let ds = TrajectoryDataset::load(path).with_context(|| format!("loading dataset {}", path.display()))?;
            if ds.state_dim != env.state_dim || ds.action_dim != env.action_dim {
                bail!(
                    "data.path: dataset has n={} m={} but {} has n={} m={}",
                    ds.state_dim,
                    ds.action_dim,
                    env.name,
                    env.state_dim,
                    env.action_dim
                );
            }
            ds
        }
        other => bail!("data.kind: unknown dataset kind '{other}'"),
    };
    Ok(ds)
}
