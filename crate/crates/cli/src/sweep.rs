//! Parallel execution of sweep cells. A failing cell is reported and the
//! rest of the sweep carries on.

use std::path::Path;

use anyhow::Result;
use rayon::prelude::*;

use crate::cache::Cache;
use crate::config::SweepPlan;
use crate::run::{execute, RunOutcome};

#[derive(Debug, Default)]
pub struct SweepOutcome {
    pub trained: usize,
    pub reused: usize,
    /// Run directory and error of every failed cell.
    pub failed: Vec<(String, String)>,
}

impl SweepOutcome {
    pub fn total(&self) -> usize {
        self.trained + self.reused + self.failed.len()
    }
}

pub fn run_sweep(plan: &SweepPlan, out: &Path, cache: &Cache, jobs: usize) -> Result<SweepOutcome> {
    for note in &plan.notes {
        log::warn!("{note}");
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let results: Vec<(String, Result<RunOutcome>)> = pool.install(|| {
        plan.cells
            .par_iter()
            .map(|cell| (cell.dir_name().display().to_string(), execute(cell, out, cache)))
            .collect()
    });
    let mut outcome = SweepOutcome::default();
    for (name, result) in results {
        match result {
            Ok(r) if r.reused => outcome.reused += 1,
            Ok(_) => outcome.trained += 1,
            Err(e) => {
                log::error!("{name}: {e:#}");
                outcome.failed.push((name, format!("{e:#}")));
            }
        }
    }
    Ok(outcome)
}
