//! Aggregation of run directories into score tables and plots.
//!
//! Output files, all under `<root>/report/`:
//!
//! | file | content |
//! |---|---|
//! | `sei.tsv` | SEI per algorithm, then its normalized score per setting |
//! | `settings.tsv` | seed-mean AUC, improvement and normalized score per setting and algorithm |
//! | `impact.tsv` | raw and normalized component impact, settings ordered by difficulty |
//! | `difficulty.tsv` | settings from easiest to hardest |
//! | `summary.json` | all of the above in one document |
//! | `sei.svg`, `impact.svg`, `curves-<setting>.svg` | plots |

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use demorl_core::compose::{AgentSpec, COMPONENTS};
use demorl_core::metrics::{
    difficulty_rank, impact_report, mean_curve, sei, AucTable, Impact, RunRecord, SettingReport,
};
use demorl_core::Error as CoreError;
use serde::Serialize;

use crate::cache::write_atomic;
use crate::plot;
use crate::run::RECORD_FILE;

pub const REPORT_DIR: &str = "report";
const CURVES_PER_PLOT: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub baseline: String,
    /// Settings left out of SEI because the baseline never succeeded.
    pub excluded: BTreeMap<String, String>,
    pub failed_runs: Vec<String>,
    pub sei: BTreeMap<String, f64>,
    pub settings: BTreeMap<String, SettingScores>,
    pub impact: BTreeMap<String, BTreeMap<String, ImpactRow>>,
    /// Easiest first; `None` for settings the baseline never solved.
    pub difficulty: Vec<(String, Option<u64>)>,
    #[serde(skip)]
    pub curves: BTreeMap<String, BTreeMap<String, Vec<(u64, f64)>>>,
    #[serde(skip)]
    pub budget: BTreeMap<String, u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SettingScores {
    pub baseline_auc: f64,
    pub seeds: BTreeMap<String, usize>,
    pub auc: BTreeMap<String, f64>,
    pub improvement: BTreeMap<String, f64>,
    pub normalized: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ImpactRow {
    pub raw: f64,
    pub normalized: f64,
}

impl From<Impact> for ImpactRow {
    fn from(i: Impact) -> Self {
        ImpactRow { raw: i.raw, normalized: i.normalized }
    }
}

/// Every `record.txt` below `root`, skipping hidden directories and the
/// report directory. Paths are visited in sorted order.
pub fn collect_records(root: &Path) -> Result<Vec<RunRecord>> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<RunRecord>) -> Result<()> {
        let mut entries: Vec<PathBuf> = fs::read_dir(dir)
            .with_context(|| format!("listing {}", dir.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        entries.sort();
        for path in entries {
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            if path.is_dir() {
                if name.starts_with('.') || (dir == root && name == REPORT_DIR) {
                    continue;
                }
                walk(&path, root, out)?;
            } else if name == RECORD_FILE {
                out.push(RunRecord::load(&path).with_context(|| format!("reading {}", path.display()))?);
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(root, root, &mut out)?;
    Ok(out)
}

pub fn build_report(records: &[RunRecord], baseline: &str) -> Result<Report> {
    let baseline: AgentSpec = baseline.parse().map_err(|e| anyhow!("baseline: {e}"))?;
    let baseline = baseline.to_string();
    if records.is_empty() {
        bail!("no run records found");
    }
    let table = AucTable::from_records(records)?;
    let failed_runs = records
        .iter()
        .filter(|r| !r.is_complete())
        .map(|r| format!("{}/{}/seed-{}", r.env, r.spec, r.seed))
        .collect();

    let mut excluded = BTreeMap::new();
    let mut reports = Vec::new();
    let mut settings = BTreeMap::new();
    for setting in table.settings() {
        let rep = match SettingReport::from_table(&table, setting, &baseline) {
            Ok(r) => r,
            Err(e @ CoreError::UndefinedImprovement(_)) => {
                log::warn!("{setting}: {e}; left out of SEI");
                excluded.insert(setting.to_string(), e.to_string());
                continue;
            }
            Err(e) => bail!("{e}"),
        };
        let seeds = table.cells[setting].iter().map(|(k, v)| (k.clone(), v.len())).collect();
        settings.insert(
            setting.to_string(),
            SettingScores {
                baseline_auc: rep.baseline_auc,
                seeds,
                auc: rep.aucs.clone(),
                improvement: rep.improvement.clone(),
                normalized: rep.normalized.clone(),
            },
        );
        reports.push(rep);
    }
    let sei = if reports.is_empty() { BTreeMap::new() } else { sei(&reports)? };

    let impact = impact_report(&table, &COMPONENTS)?
        .into_iter()
        .map(|(s, m)| (s, m.into_iter().map(|(c, i)| (c, i.into())).collect()))
        .collect();

    let mut baselines: BTreeMap<String, Vec<RunRecord>> = BTreeMap::new();
    let mut by_spec: BTreeMap<String, BTreeMap<String, Vec<&RunRecord>>> = BTreeMap::new();
    let mut budget: BTreeMap<String, u64> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_complete()) {
        let spec = r.spec.parse::<AgentSpec>()?.to_string();
        if spec == baseline {
            baselines.entry(r.env.clone()).or_default().push(r.clone());
        }
        by_spec.entry(r.env.clone()).or_default().entry(spec).or_default().push(r);
        let b = budget.entry(r.env.clone()).or_default();
        *b = (*b).max(r.budget);
    }
    let difficulty = difficulty_rank(&baselines)?;
    let curves = by_spec
        .into_iter()
        .map(|(env, specs)| (env, specs.into_iter().map(|(s, rs)| (s, mean_curve(&rs))).collect()))
        .collect();

    Ok(Report { baseline, excluded, failed_runs, sei, settings, impact, difficulty, curves, budget })
}

fn num(x: f64) -> String {
    let s = format!("{x:.6}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        "0.000000".into()
    } else {
        s
    }
}

fn sei_order(report: &Report) -> Vec<(&String, f64)> {
    let mut rows: Vec<(&String, f64)> = report.sei.iter().map(|(k, v)| (k, *v)).collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    rows
}

pub fn sei_tsv(report: &Report) -> String {
    let mut out = String::from("algorithm\tsei");
    for s in report.settings.keys() {
        out.push('\t');
        out.push_str(s);
    }
    out.push('\n');
    for (alg, v) in sei_order(report) {
        out.push_str(&format!("{alg}\t{}", num(v)));
        for scores in report.settings.values() {
            out.push('\t');
            out.push_str(&scores.normalized.get(alg).map_or("-".into(), |x| num(*x)));
        }
        out.push('\n');
    }
    out
}

pub fn settings_tsv(report: &Report) -> String {
    let mut out = String::from("setting\talgorithm\tseeds\tauc\timprovement\tnormalized\n");
    for (setting, s) in &report.settings {
        for (alg, auc) in &s.auc {
            out.push_str(&format!(
                "{setting}\t{alg}\t{}\t{}\t{}\t{}\n",
                s.seeds[alg],
                num(*auc),
                num(s.improvement[alg]),
                num(s.normalized[alg])
            ));
        }
    }
    out
}

fn difficulty_label(d: Option<u64>) -> String {
    d.map_or("unreached".into(), |s| s.to_string())
}

pub fn difficulty_tsv(report: &Report) -> String {
    let mut out = String::from("rank\tsetting\tdifficulty\n");
    for (i, (s, d)) in report.difficulty.iter().enumerate() {
        out.push_str(&format!("{}\t{s}\t{}\n", i + 1, difficulty_label(*d)));
    }
    out
}

/// Settings in difficulty order, then any without baseline runs.
fn ordered_settings(report: &Report) -> Vec<(String, Option<u64>)> {
    let mut out = report.difficulty.clone();
    for s in report.impact.keys() {
        if !out.iter().any(|(x, _)| x == s) {
            out.push((s.clone(), None));
        }
    }
    out
}

pub fn impact_tsv(report: &Report) -> String {
    let mut out = String::from("setting\tdifficulty\tcomponent\traw\tnormalized\n");
    for (setting, d) in ordered_settings(report) {
        let Some(rows) = report.impact.get(&setting) else { continue };
        for c in COMPONENTS {
            if let Some(i) = rows.get(c) {
                out.push_str(&format!("{setting}\t{}\t{c}\t{}\t{}\n", difficulty_label(d), num(i.raw), num(i.normalized)));
            }
        }
    }
    out
}

fn file_safe(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Writes every table and plot into `dir`, returning the written paths.
pub fn write_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(String, String)> = vec![
        ("sei.tsv".into(), sei_tsv(report)),
        ("settings.tsv".into(), settings_tsv(report)),
        ("impact.tsv".into(), impact_tsv(report)),
        ("difficulty.tsv".into(), difficulty_tsv(report)),
        ("summary.json".into(), serde_json::to_string_pretty(report)? + "\n"),
    ];

    let bars: Vec<(String, f64)> = sei_order(report).into_iter().map(|(k, v)| (k.clone(), v)).collect();
    files.push(("sei.svg".into(), plot::bar_chart(&format!("SEI relative to {}", report.baseline), &bars)));

    let groups: Vec<(String, Vec<f64>)> = COMPONENTS
        .iter()
        .map(|c| (c.to_string(), report.impact.values().filter_map(|m| m.get(*c).map(|i| i.normalized)).collect()))
        .collect();
    files.push(("impact.svg".into(), plot::whisker_chart("normalized component impact across settings", &groups)));

    for (setting, specs) in &report.curves {
        let mut chosen: Vec<&String> = specs.keys().filter(|s| **s != report.baseline).collect();
        if let Some(scores) = report.settings.get(setting) {
            chosen.sort_by(|a, b| {
                let (x, y) = (scores.auc.get(*a).unwrap_or(&0.0), scores.auc.get(*b).unwrap_or(&0.0));
                y.total_cmp(x).then_with(|| a.cmp(b))
            });
        }
        chosen.truncate(CURVES_PER_PLOT - 1);
        if specs.contains_key(&report.baseline) {
            chosen.insert(0, &report.baseline);
        }
        let series: Vec<(String, Vec<(u64, f64)>)> = chosen.into_iter().map(|s| (s.clone(), specs[s].clone())).collect();
        let svg = plot::line_chart(&format!("success rate on {setting}"), &series, report.budget[setting]);
        files.push((format!("curves-{}.svg", file_safe(setting)), svg));
    }

    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        write_atomic(&path, &body)?;
        written.push(path);
    }
    Ok(written)
}

/// Reads every run below `root` and writes the report to `<root>/report`.
pub fn generate(root: &Path, baseline: &str) -> Result<Vec<PathBuf>> {
    let records = collect_records(root)?;
    let report = build_report(&records, baseline)?;
    for s in &report.failed_runs {
        log::warn!("failed run left out: {s}");
    }
    write_report(&report, &root.join(REPORT_DIR))
}
