//! Run record text format:
//!
//! ```text
//! # env = point-reach
//! # spec = sac+demos+prefill+bc
//! # seed = 0
//! # budget = 20000
//! # status = complete
//! # hyper.gamma = 0.8
//! env_step success_rate mean_return
//! 0 0 -41.3
//! 1000 0.35 -20.25
//! ```
//!
//! Header keys other than the first five are free-form configuration
//! snapshot entries. A failed run has `status = failed: <message>`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalPoint {
    pub env_step: u64,
    pub success_rate: f64,
    pub mean_return: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Complete,
    Failed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub env: String,
    /// Canonical agent spec string.
    pub spec: String,
    pub seed: u64,
    pub budget: u64,
    pub status: RunStatus,
    pub config: Vec<(String, String)>,
    pub points: Vec<EvalPoint>,
}

const COLUMNS: &str = "env_step success_rate mean_return";

impl RunRecord {
    pub fn new(env: &str, spec: &str, seed: u64, budget: u64) -> Self {
        RunRecord {
            env: env.to_string(),
            spec: spec.to_string(),
            seed,
            budget,
            status: RunStatus::Complete,
            config: Vec::new(),
            points: Vec::new(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.status == RunStatus::Complete
    }

    /// Appends a point, keeping steps strictly increasing and rates in `[0, 1]`.
    pub fn push(&mut self, p: EvalPoint) -> Result<()> {
        if self.points.last().is_some_and(|l| l.env_step >= p.env_step) {
            return Err(Error::config(format!("evaluation step {} does not increase", p.env_step)));
        }
        if !(0.0..=1.0).contains(&p.success_rate) || !p.mean_return.is_finite() {
            return Err(Error::numerical("evaluation point", p.success_rate));
        }
        self.points.push(p);
        Ok(())
    }

    pub fn final_success(&self) -> Option<f64> {
        self.points.last().map(|p| p.success_rate)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let status = match &self.status {
            RunStatus::Complete => "complete".to_string(),
            RunStatus::Failed(msg) => format!("failed: {}", msg.replace('\n', " ")),
        };
        writeln!(s, "# env = {}", self.env).unwrap();
        writeln!(s, "# spec = {}", self.spec).unwrap();
        writeln!(s, "# seed = {}", self.seed).unwrap();
        writeln!(s, "# budget = {}", self.budget).unwrap();
        writeln!(s, "# status = {status}").unwrap();
        for (k, v) in &self.config {
            writeln!(s, "# {k} = {v}").unwrap();
        }
        writeln!(s, "{COLUMNS}").unwrap();
        for p in &self.points {
            writeln!(s, "{} {} {}", p.env_step, p.success_rate, p.mean_return).unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rec = RunRecord::new("", "", 0, 0);
        let mut seen = [false; 5];
        let mut in_table = false;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let perr = |msg: String| Error::Parse { line: line_no, msg };
            if let Some(rest) = line.strip_prefix('#') {
                if in_table {
                    return Err(perr("header line after the table".into()));
                }
                let (k, v) = rest.split_once('=').ok_or_else(|| perr("header needs 'key = value'".into()))?;
                let (k, v) = (k.trim(), v.trim());
                let num = |v: &str| v.parse::<u64>().map_err(|_| perr(format!("bad {k} '{v}'")));
                match k {
                    "env" => (rec.env, seen[0]) = (v.to_string(), true),
                    "spec" => (rec.spec, seen[1]) = (v.to_string(), true),
                    "seed" => (rec.seed, seen[2]) = (num(v)?, true),
                    "budget" => (rec.budget, seen[3]) = (num(v)?, true),
                    "status" => {
                        rec.status = match v {
                            "complete" => RunStatus::Complete,
                            _ => RunStatus::Failed(v.strip_prefix("failed:").map(str::trim).unwrap_or(v).to_string()),
                        };
                        seen[4] = true;
                    }
                    _ => rec.config.push((k.to_string(), v.to_string())),
                }
            } else if line.trim() == COLUMNS {
                in_table = true;
            } else if !line.trim().is_empty() {
                if !in_table {
                    return Err(perr(format!("expected column line '{COLUMNS}'")));
                }
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() != 3 {
                    return Err(perr(format!("expected 3 fields, got {}", f.len())));
                }
                let p = EvalPoint {
                    env_step: f[0].parse().map_err(|_| perr("bad env_step".into()))?,
                    success_rate: f[1].parse().map_err(|_| perr("bad success_rate".into()))?,
                    mean_return: f[2].parse().map_err(|_| perr("bad mean_return".into()))?,
                };
                rec.push(p).map_err(|e| perr(e.to_string()))?;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Parse { line: 0, msg: "run record header is missing env, spec, seed, budget or status".into() });
        }
        Ok(rec)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}
