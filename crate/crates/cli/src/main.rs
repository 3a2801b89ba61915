use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use demorl_cli::cache::{build_dataset, replace_dir_atomic, Cache};
use demorl_cli::config::{load_run, load_sweep, RunPlan};
use demorl_cli::report::{generate, REPORT_DIR};
use demorl_cli::run::{checkpoint_spec, execute};
use demorl_cli::sweep::run_sweep;

#[derive(Parser)]
#[command(name = "demorl", version, about = "Train and compare demonstration-augmented actor-critic agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and write its run directory.
    Run {
        #[command(flatten)]
        common: Common,
        /// Overrides the configured environment-step budget.
        #[arg(long)]
        budget: Option<u64>,
        /// Root of the run directories.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Run every cell of a sweep, then write the report.
    Sweep {
        #[arg(long, short)]
        config: PathBuf,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Cells trained in parallel.
        #[arg(long, short, default_value_t = 1)]
        jobs: usize,
    },
    /// Aggregate the run directories below a root into tables and plots.
    Report {
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Spec every algorithm is compared against.
        #[arg(long, default_value = "sac")]
        baseline: String,
    },
    /// Build the configured offline dataset and save it as a text file.
    MakeDemos {
        #[command(flatten)]
        common: Common,
        /// Destination file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Pretrain the configured offline checkpoint into a directory.
    Pretrain {
        #[command(flatten)]
        common: Common,
        /// Destination directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn plan(common: &Common) -> Result<RunPlan> {
    let mut plan = load_run(&common.config)?;
    if let Some(s) = common.seed {
        plan.seed = s;
        plan.data.seed = s;
    }
    Ok(plan)
}

fn cache_for(out: &Path) -> Cache {
    Cache::from_env(out)
}

fn hit(flag: Option<bool>) -> &'static str {
    match flag {
        Some(true) => "cached",
        Some(false) => "built",
        None => "unused",
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { common, budget, out } => {
            let mut plan = plan(&common)?;
            if let Some(b) = budget {
                plan.budget = b;
            }
            let outcome = execute(&plan, &out, &cache_for(&out))?;
            println!("run directory: {}", outcome.dir.display());
            if outcome.reused {
                println!("up to date, nothing trained");
            } else {
                println!("dataset: {}, checkpoint: {}", hit(outcome.dataset_hit), hit(outcome.checkpoint_hit));
            }
            match outcome.record.final_success() {
                Some(s) => println!("final success rate: {s:.3}"),
                None => println!("no evaluations recorded"),
            }
        }
        Command::Sweep { config, budget, out, jobs } => {
            let mut plan = load_sweep(&config)?;
            if let Some(b) = budget {
                plan.cells.iter_mut().for_each(|c| c.budget = b);
            }
            println!("{} cells", plan.cells.len());
            let outcome = run_sweep(&plan, &out, &cache_for(&out), jobs)?;
            println!(
                "trained {}, up to date {}, failed {}",
                outcome.trained,
                outcome.reused,
                outcome.failed.len()
            );
            match generate(&out, "sac") {
                Ok(files) => println!("report: {} files in {}", files.len(), out.join(REPORT_DIR).display()),
                Err(e) => log::warn!("report not written: {e:#}"),
            }
            if !outcome.failed.is_empty() {
                for (cell, e) in &outcome.failed {
                    eprintln!("failed {cell}: {e}");
                }
                bail!("{} of {} cells failed", outcome.failed.len(), outcome.total());
            }
        }
        Command::Report { out, baseline } => {
            let files = generate(&out, &baseline)?;
            for f in files {
                println!("{}", f.display());
            }
        }
        Command::MakeDemos { common, out } => {
            let plan = plan(&common)?;
            let ds = build_dataset(&plan.env, &plan.data, &plan.hyper)?;
            ds.save(&out).with_context(|| format!("writing {}", out.display()))?;
            println!("{} episodes, {} transitions -> {}", ds.episodes.len(), ds.num_transitions(), out.display());
        }
        Command::Pretrain { common, out } => {
            let plan = plan(&common)?;
            let cache = cache_for(out.parent().unwrap_or(Path::new(".")));
            let (ds, _) = cache.dataset(&plan.env, &plan.data, &plan.hyper)?;
            let (ck, cached) = cache.checkpoint(&ds, &checkpoint_spec(&plan))?;
            replace_dir_atomic(&out, |dir| Ok(ck.save(dir)?))?;
            println!("{} checkpoint ({}) -> {}", ck.provenance.method, if cached { "cached" } else { "trained" }, out.display());
        }
    }
    Ok(())
}
