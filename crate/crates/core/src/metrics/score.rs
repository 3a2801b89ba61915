//! Sample-efficiency scoring over run records.

use std::collections::BTreeMap;

use crate::compose::AgentSpec;
use crate::error::{Error, Result};

use super::record::{EvalPoint, RunRecord};

/// Normalized area under the success curve on `[0, budget]`.
///
/// Consecutive samples are joined by straight lines; the last value is held
/// until `budget` and the first value is held back to step 0. Samples past
/// the budget are cut at the budget by interpolation.
pub fn auc(points: &[EvalPoint], budget: u64) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::NotReady(format!("AUC needs at least 2 samples, got {}", points.len())));
    }
    if budget == 0 {
        return Err(Error::NotReady("AUC over an empty step range".into()));
    }
    let b = budget as f64;
    let first = &points[0];
    let mut area = first.success_rate * (first.env_step as f64).min(b);
    for w in points.windows(2) {
        let (x0, y0, x1, y1) = (w[0].env_step as f64, w[0].success_rate, w[1].env_step as f64, w[1].success_rate);
        if x0 >= b {
            break;
        }
        let (xe, ye) = if x1 > b { (b, y0 + (y1 - y0) * (b - x0) / (x1 - x0)) } else { (x1, y1) };
        area += 0.5 * (y0 + ye) * (xe - x0);
    }
    let last = points.last().unwrap();
    if (last.env_step as f64) < b {
        area += last.success_rate * (b - last.env_step as f64);
    }
    Ok(area / b)
}

pub fn record_auc(record: &RunRecord) -> Result<f64> {
    auc(&record.points, record.budget)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Relative change of the seed-mean AUC against the baseline's seed mean.
pub fn improvement(alg: &[f64], base: &[f64]) -> Result<f64> {
    if alg.is_empty() || base.is_empty() {
        return Err(Error::NotReady("improvement needs at least one seed on each side".into()));
    }
    let b = mean(base);
    if b <= 0.0 {
        return Err(Error::UndefinedImprovement(b));
    }
    Ok((mean(alg) - b) / b)
}

/// Scales positives by the largest positive and negatives by the magnitude
/// of the most negative value, so results lie in `[-1, 1]` with signs kept.
pub fn normalize_signed(values: &[f64]) -> Vec<f64> {
    let best = values.iter().cloned().filter(|v| *v > 0.0).fold(0.0, f64::max);
    let worst = values.iter().cloned().filter(|v| *v < 0.0).fold(0.0, f64::min);
    values
        .iter()
        .map(|&v| {
            if v > 0.0 {
                v / best
            } else if v < 0.0 {
                v / -worst
            } else {
                0.0
            }
        })
        .collect()
}

/// Per-seed AUCs keyed by setting, then canonical spec string, then seed.
/// Failed runs are left out.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AucTable {
    pub cells: BTreeMap<String, BTreeMap<String, BTreeMap<u64, f64>>>,
}

impl AucTable {
    pub fn from_records(records: &[RunRecord]) -> Result<Self> {
        let mut t = AucTable::default();
        for r in records {
            if !r.is_complete() {
                log::warn!("skipping failed run {} {} seed {}", r.env, r.spec, r.seed);
                continue;
            }
            let spec: AgentSpec = r.spec.parse()?;
            let a = record_auc(r)?;
            let seeds = t.cells.entry(r.env.clone()).or_default().entry(spec.to_string()).or_default();
            if seeds.insert(r.seed, a).is_some() {
                return Err(Error::config(format!("duplicate run {} {} seed {}", r.env, spec, r.seed)));
            }
        }
        Ok(t)
    }

    pub fn settings(&self) -> impl Iterator<Item = &str> {
        self.cells.keys().map(String::as_str)
    }

    pub fn seeds(&self, setting: &str, spec: &str) -> Option<Vec<f64>> {
        self.cells.get(setting)?.get(spec).map(|m| m.values().cloned().collect())
    }

    pub fn mean(&self, setting: &str, spec: &str) -> Option<f64> {
        self.seeds(setting, spec).map(|v| mean(&v))
    }
}

/// Scores of every algorithm in one setting relative to a baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct SettingReport {
    pub setting: String,
    pub baseline: String,
    pub baseline_auc: f64,
    /// Seed-mean AUC.
    pub aucs: BTreeMap<String, f64>,
    pub improvement: BTreeMap<String, f64>,
    pub normalized: BTreeMap<String, f64>,
}

impl SettingReport {
    pub fn new(setting: &str, runs: &BTreeMap<String, Vec<f64>>, baseline: &str) -> Result<Self> {
        let base = runs
            .get(baseline)
            .ok_or_else(|| Error::NotReady(format!("setting {setting} has no {baseline} runs")))?;
        let mut gains = BTreeMap::new();
        let mut aucs = BTreeMap::new();
        for (alg, seeds) in runs {
            gains.insert(alg.clone(), improvement(seeds, base)?);
            aucs.insert(alg.clone(), mean(seeds));
        }
        let names: Vec<String> = gains.keys().cloned().collect();
        let vals: Vec<f64> = gains.values().cloned().collect();
        let normalized = names.into_iter().zip(normalize_signed(&vals)).collect();
        Ok(SettingReport {
            setting: setting.to_string(),
            baseline: baseline.to_string(),
            baseline_auc: mean(base),
            aucs,
            improvement: gains,
            normalized,
        })
    }

    pub fn from_table(table: &AucTable, setting: &str, baseline: &str) -> Result<Self> {
        let runs = table
            .cells
            .get(setting)
            .ok_or_else(|| Error::NotReady(format!("no runs for setting {setting}")))?
            .iter()
            .map(|(k, v)| (k.clone(), v.values().cloned().collect()))
            .collect();
        Self::new(setting, &runs, baseline)
    }
}

/// Mean normalized score across settings. Algorithms missing from any
/// setting are dropped with a warning.
pub fn sei(reports: &[SettingReport]) -> Result<BTreeMap<String, f64>> {
    let first = reports.first().ok_or_else(|| Error::NotReady("no settings to aggregate".into()))?;
    let mut out = BTreeMap::new();
    let all: std::collections::BTreeSet<&String> = reports.iter().flat_map(|r| r.normalized.keys()).collect();
    for alg in all {
        let scores: Option<Vec<f64>> = reports.iter().map(|r| r.normalized.get(alg).cloned()).collect();
        match scores {
            Some(s) => {
                out.insert(alg.clone(), mean(&s));
            }
            None => log::warn!("{alg} is missing from some settings and is excluded from SEI"),
        }
    }
    debug_assert!(out.get(&first.baseline).is_none_or(|v| *v == 0.0));
    Ok(out)
}

/// Raw impact of `component` per setting: the mean, over spec pairs that
/// differ only in that component, of the seed-mean AUC difference
/// (with minus without). `None` marks settings without a single pair.
pub fn component_impact(table: &AucTable, component: &str) -> Result<BTreeMap<String, Option<f64>>> {
    let mut out = BTreeMap::new();
    for (setting, specs) in &table.cells {
        let mut diffs = Vec::new();
        for (name, seeds) in specs {
            let spec: AgentSpec = name.parse()?;
            if !spec.has(component) {
                continue;
            }
            let Some(other) = spec.without(component) else { continue };
            if let Some(off) = specs.get(&other.to_string()) {
                let on: Vec<f64> = seeds.values().cloned().collect();
                let off: Vec<f64> = off.values().cloned().collect();
                diffs.push(mean(&on) - mean(&off));
            }
        }
        out.insert(setting.clone(), (!diffs.is_empty()).then(|| mean(&diffs)));
    }
    Ok(out)
}

/// Impact of removing `component`; the negation of [`component_impact`].
pub fn absence_impact(table: &AucTable, component: &str) -> Result<BTreeMap<String, Option<f64>>> {
    Ok(component_impact(table, component)?.into_iter().map(|(k, v)| (k, v.map(|x| -x))).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Impact {
    pub raw: f64,
    pub normalized: f64,
}

/// Per setting, per component impact; components without pairs in a
/// setting are absent from its map. Normalization runs across the
/// components present in each setting.
pub fn impact_report(table: &AucTable, components: &[&str]) -> Result<BTreeMap<String, BTreeMap<String, Impact>>> {
    let mut raw: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for setting in table.settings() {
        raw.insert(setting.to_string(), BTreeMap::new());
    }
    for c in components {
        for (setting, v) in component_impact(table, c)? {
            if let Some(v) = v {
                raw.get_mut(&setting).unwrap().insert(c.to_string(), v);
            }
        }
    }
    Ok(raw
        .into_iter()
        .map(|(setting, m)| {
            let vals: Vec<f64> = m.values().cloned().collect();
            let norm = normalize_signed(&vals);
            let inner = m.into_iter().zip(norm).map(|((c, r), n)| (c, Impact { raw: r, normalized: n })).collect();
            (setting, inner)
        })
        .collect())
}

/// Seed-mean success curve over the steps shared by every record.
pub fn mean_curve(records: &[&RunRecord]) -> Vec<(u64, f64)> {
    let Some(first) = records.first() else { return Vec::new() };
    first
        .points
        .iter()
        .filter_map(|p| {
            let vals: Option<Vec<f64>> = records
                .iter()
                .map(|r| r.points.iter().find(|q| q.env_step == p.env_step).map(|q| q.success_rate))
                .collect();
            vals.map(|v| (p.env_step, mean(&v)))
        })
        .collect()
}

/// First step where the seed-mean success reaches 99% of its maximum.
/// `None` when the curve never leaves zero.
pub fn difficulty(records: &[&RunRecord]) -> Result<Option<u64>> {
    let curve = mean_curve(records);
    if curve.is_empty() {
        return Err(Error::NotReady("no baseline samples".into()));
    }
    let max = curve.iter().map(|c| c.1).fold(0.0, f64::max);
    if max <= 0.0 {
        return Ok(None);
    }
    Ok(curve.iter().find(|c| c.1 >= 0.99 * max).map(|c| c.0))
}

/// Settings ordered from easiest to hardest; unrankable ones come last.
pub fn difficulty_rank(baselines: &BTreeMap<String, Vec<RunRecord>>) -> Result<Vec<(String, Option<u64>)>> {
    let mut out = Vec::new();
    for (setting, runs) in baselines {
        let refs: Vec<&RunRecord> = runs.iter().filter(|r| r.is_complete()).collect();
        out.push((setting.clone(), difficulty(&refs)?));
    }
    out.sort_by_key(|(s, d)| (d.is_none(), d.unwrap_or(0), s.clone()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(xs: &[(u64, f64)]) -> Vec<EvalPoint> {
        xs.iter().map(|&(s, r)| EvalPoint { env_step: s, success_rate: r, mean_return: 0.0 }).collect()
    }

    fn rec(env: &str, spec: &str, seed: u64, curve: &[(u64, f64)]) -> RunRecord {
        let mut r = RunRecord::new(env, spec, seed, curve.last().unwrap().0);
        for p in pts(curve) {
            r.push(p).unwrap();
        }
        r
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&pts(&[(0, 1.0), (100, 1.0)]), 100).unwrap(), 1.0);
        assert_eq!(auc(&pts(&[(0, 0.0), (100, 0.0)]), 100).unwrap(), 0.0);
        assert_eq!(auc(&pts(&[(0, 0.0), (50, 1.0)]), 100).unwrap(), 0.75);
        assert!(matches!(auc(&pts(&[(0, 1.0)]), 100), Err(Error::NotReady(_))));
    }

    #[test]
    fn auc_cuts_samples_past_budget() {
        // line from (0,0) to (200,1) cut at 100: triangle of area 25
        assert_eq!(auc(&pts(&[(0, 0.0), (200, 1.0)]), 100).unwrap(), 0.25);
    }

    #[test]
    fn improvement_examples() {
        assert_eq!(improvement(&[0.4, 0.4], &[0.4, 0.4]).unwrap(), 0.0);
        assert!((improvement(&[0.6], &[0.4]).unwrap() - 0.5).abs() < 1e-15);
        assert!((improvement(&[0.2], &[0.4]).unwrap() + 0.5).abs() < 1e-15);
        assert!(matches!(improvement(&[0.2], &[0.0, 0.0]), Err(Error::UndefinedImprovement(_))));
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_signed(&[0.5, 0.2, -0.1]), vec![1.0, 0.4, -1.0]);
        assert_eq!(normalize_signed(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(normalize_signed(&[0.3]), vec![1.0]);
        assert_eq!(normalize_signed(&[-0.4, -0.1]), vec![-1.0, -0.25]);
    }

    fn report(setting: &str, runs: &[(&str, f64)]) -> SettingReport {
        let m = runs.iter().map(|(k, v)| (k.to_string(), vec![*v])).collect();
        SettingReport::new(setting, &m, "sac").unwrap()
    }

    #[test]
    fn sei_examples() {
        let one = report("a", &[("sac", 0.4), ("w", 0.5), ("x", 0.6), ("y", 0.2)]);
        let s = sei(std::slice::from_ref(&one)).unwrap();
        assert_eq!(s, one.normalized);
        assert_eq!(s["sac"], 0.0);
        // x normalizes to 1.0 in "a" and 0.5 in "b"
        let two = report("b", &[("sac", 0.4), ("w", 0.6), ("x", 0.5), ("y", 0.2)]);
        let s = sei(&[one, two]).unwrap();
        assert_eq!(s["x"], 0.75);
        assert_eq!(s["y"], -1.0);
        assert_eq!(s["sac"], 0.0);
        assert!(matches!(sei(&[]), Err(Error::NotReady(_))));
    }

    #[test]
    fn sei_excludes_partial_algorithms() {
        let a = report("a", &[("sac", 0.4), ("x", 0.6), ("z", 0.8)]);
        let b = report("b", &[("sac", 0.4), ("x", 0.6)]);
        let s = sei(&[a, b]).unwrap();
        assert!(!s.contains_key("z"));
        // z still anchors the normalization inside "a"
        assert_eq!(s["x"], 0.75);
    }

    fn table(rows: &[(&str, &str, f64)]) -> AucTable {
        let mut t = AucTable::default();
        for (env, spec, a) in rows {
            t.cells.entry(env.to_string()).or_default().entry(spec.to_string()).or_default().insert(0, *a);
        }
        t
    }

    #[test]
    fn impact_examples() {
        let t = table(&[("e", "sac+demos+prefill+auxbc", 0.6), ("e", "sac+demos+prefill", 0.4)]);
        let v = component_impact(&t, "auxbc").unwrap()["e"].unwrap();
        assert!((v - 0.2).abs() < 1e-15);
        assert!((absence_impact(&t, "auxbc").unwrap()["e"].unwrap() + 0.2).abs() < 1e-15);
        // every spec carries demos and none carries rollouts, so no pairs
        assert_eq!(component_impact(&t, "demos").unwrap()["e"], None);

        let t = table(&[
            ("e", "sac+demos+prefill+auxbc", 0.6),
            ("e", "sac+demos+prefill", 0.4),
            ("e", "sac+demos+auxbc+bc", 0.5),
            ("e", "sac+bc", 0.5),
        ]);
        let v = component_impact(&t, "auxbc").unwrap()["e"].unwrap();
        assert!((v - 0.1).abs() < 1e-15);
    }

    #[test]
    fn impact_report_normalizes_across_components() {
        let t = table(&[("e", "sac", 0.2), ("e", "sac+demos+prefill", 0.6), ("e", "sac+demos+prefill+auxbc", 0.4)]);
        let r = impact_report(&t, &["prefill", "auxbc", "cheq"]).unwrap();
        let e = &r["e"];
        assert_eq!(e["prefill"].normalized, 1.0);
        assert_eq!(e["auxbc"].normalized, -1.0);
        assert!(!e.contains_key("cheq"));
    }

    #[test]
    fn difficulty_examples() {
        let a = rec("e", "sac", 0, &[(0, 0.0), (10_000, 0.5), (20_000, 0.5)]);
        assert_eq!(difficulty(&[&a]).unwrap(), Some(10_000));
        let b = rec("e", "sac", 0, &[(0, 0.0), (10_000, 0.2), (20_000, 0.6), (30_000, 0.995), (40_000, 1.0)]);
        assert_eq!(difficulty(&[&b]).unwrap(), Some(30_000));
        let flat = rec("e", "sac", 0, &[(0, 0.0), (10_000, 0.0)]);
        assert_eq!(difficulty(&[&flat]).unwrap(), None);

        let mut m = BTreeMap::new();
        m.insert("hard".to_string(), vec![rec("hard", "sac", 0, &[(0, 0.0), (40_000, 1.0)])]);
        m.insert("easy".to_string(), vec![rec("easy", "sac", 0, &[(0, 0.0), (10_000, 1.0), (40_000, 1.0)])]);
        m.insert("flat".to_string(), vec![flat]);
        let order: Vec<_> = difficulty_rank(&m).unwrap();
        assert_eq!(
            order,
            vec![("easy".to_string(), Some(10_000)), ("hard".to_string(), Some(40_000)), ("flat".to_string(), None)]
        );
    }

    #[test]
    fn difficulty_uses_seed_mean() {
        let a = rec("e", "sac", 0, &[(0, 0.0), (10, 1.0), (20, 1.0)]);
        let b = rec("e", "sac", 1, &[(0, 0.0), (10, 0.0), (20, 1.0)]);
        assert_eq!(difficulty(&[&a, &b]).unwrap(), Some(20));
    }

    #[test]
    fn table_skips_failed_runs() {
        let ok = rec("e", "sac", 0, &[(0, 0.0), (10, 1.0)]);
        let mut bad = rec("e", "sac", 1, &[(0, 0.0), (10, 1.0)]);
        bad.status = crate::metrics::RunStatus::Failed("nan".into());
        let t = AucTable::from_records(&[ok.clone(), bad]).unwrap();
        assert_eq!(t.seeds("e", "sac").unwrap().len(), 1);
        assert!(AucTable::from_records(&[ok.clone(), ok]).is_err());
    }

    fn curve() -> impl Strategy<Value = Vec<(u64, f64)>> {
        prop::collection::vec((1u64..500, 0.0f64..=1.0), 2..12).prop_map(|v| {
            let mut step = 0;
            v.into_iter()
                .map(|(d, r)| {
                    let p = (step, r);
                    step += d * 2;
                    p
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn auc_collinear_insertion_invariant(c in curve(), at in 0usize..10, extra in 1u64..2000) {
            let p = pts(&c);
            let last = *p.last().unwrap();
            let budget = last.env_step + extra;
            let base = auc(&p, budget).unwrap();
            let i = at % (p.len() - 1);
            let (a, b) = (p[i], p[i + 1]);
            let mid = EvalPoint { env_step: (a.env_step + b.env_step) / 2, success_rate: 0.5 * (a.success_rate + b.success_rate), mean_return: 0.0 };
            let mut q = p.clone();
            q.insert(i + 1, mid);
            // a trailing sample on the hold line is redundant as well
            q.push(EvalPoint { env_step: last.env_step + extra / 2 + 1, ..last });
            prop_assert!((auc(&q, budget).unwrap() - base).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&base));
        }

        #[test]
        fn normalize_keeps_sign_and_order(v in prop::collection::vec(-5.0f64..5.0, 1..20)) {
            let n = normalize_signed(&v);
            for (i, (a, x)) in v.iter().zip(&n).enumerate() {
                prop_assert_eq!(a.signum() * (*a != 0.0) as i32 as f64, x.signum() * (*x != 0.0) as i32 as f64);
                prop_assert!((-1.0..=1.0).contains(x));
                for (b, y) in v.iter().zip(&n).skip(i + 1) {
                    if a.signum() == b.signum() && a < b { prop_assert!(x <= y); }
                }
            }
            if v.iter().any(|x| *x > 0.0) { prop_assert!(n.contains(&1.0)); }
            if v.iter().any(|x| *x < 0.0) { prop_assert!(n.contains(&-1.0)); }
        }

        #[test]
        fn baseline_normalizes_to_zero(aucs in prop::collection::vec(0.01f64..1.0, 2..8)) {
            let runs: BTreeMap<String, Vec<f64>> = aucs.iter().enumerate().map(|(i, a)| {
                (if i == 0 { "sac".to_string() } else { format!("alg{i}") }, vec![*a])
            }).collect();
            let r = SettingReport::new("e", &runs, "sac").unwrap();
            prop_assert_eq!(r.normalized["sac"], 0.0);
            prop_assert_eq!(sei(&[r]).unwrap()["sac"], 0.0);
        }
    }
}
