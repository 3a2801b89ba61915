//! Offline dataset interchange format (plain text, space separated):
//!
//! ```text
//! n m gamma T
//! episode_id t s[0] .. s[n-1] a[0] .. a[m-1] r terminal
//! ...
//! ```
//!
//! Reals are written in shortest round-trip decimal form, `terminal` as 0/1.
//! Each episode's rows are contiguous with `t = 0, 1, ..`. The next state of
//! a row is the state of the following row; the final row of an episode
//! carries its successor state as `n` trailing fields, which also marks the
//! episode as finished. One line per transition after the header.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::buffer::ReplayBuffer;
use super::transition::{mc_returns, Transition};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub id: u64,
    pub transitions: Vec<Transition>,
}

impl Episode {
    /// Undiscounted return.
    pub fn total_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Ordered complete episodes with their dimensions and discount.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryDataset {
    pub state_dim: usize,
    pub action_dim: usize,
    pub gamma: f64,
    pub horizon: usize,
    pub episodes: Vec<Episode>,
}

impl TrajectoryDataset {
    pub fn new(state_dim: usize, action_dim: usize, gamma: f64, horizon: usize) -> Self {
        TrajectoryDataset { state_dim, action_dim, gamma, horizon, episodes: Vec::new() }
    }

    pub fn num_transitions(&self) -> usize {
        self.episodes.iter().map(Episode::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.num_transitions() == 0
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.episodes.iter().flat_map(|e| e.transitions.iter())
    }

    /// Every episode is contiguous, starts at `t = 0` and matches the dims.
    pub fn validate(&self) -> Result<()> {
        for ep in &self.episodes {
            for (k, tr) in ep.transitions.iter().enumerate() {
                if tr.episode_id != ep.id || tr.t != k {
                    return Err(Error::config(format!("episode {} has a gap or foreign row at position {k}", ep.id)));
                }
                if tr.state.len() != self.state_dim || tr.next_state.len() != self.state_dim || tr.action.len() != self.action_dim {
                    return Err(Error::config(format!("episode {} row {k} has wrong dimensions", ep.id)));
                }
                if !tr.is_finite() {
                    return Err(Error::numerical(format!("dataset episode {} row {k}", ep.id), f64::NAN));
                }
                if let Some(next) = ep.transitions.get(k + 1) {
                    if next.state != tr.next_state {
                        return Err(Error::config(format!("episode {} row {k}: next state differs from row {}", ep.id, k + 1)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Per-transition Monte-Carlo returns, in [`TrajectoryDataset::transitions`] order.
    pub fn mc_returns(&self, gamma: f64) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.num_transitions());
        for ep in &self.episodes {
            out.extend(mc_returns(&ep.transitions, gamma)?);
        }
        Ok(out)
    }

    pub fn to_buffer(&self, capacity: usize) -> Result<ReplayBuffer> {
        let mut buf = ReplayBuffer::new(self.state_dim, self.action_dim, capacity.max(self.num_transitions()));
        for ep in &self.episodes {
            for tr in &ep.transitions {
                buf.push(tr.clone())?;
            }
            buf.end_episode();
        }
        Ok(buf)
    }

    /// Appends `extra` to every state (used when the agent observes an
    /// augmented state).
    pub fn with_state_suffix(&self, extra: &[f64]) -> TrajectoryDataset {
        let mut out = self.clone();
        out.state_dim += extra.len();
        for tr in out.episodes.iter_mut().flat_map(|e| e.transitions.iter_mut()) {
            tr.state.extend_from_slice(extra);
            tr.next_state.extend_from_slice(extra);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{} {} {} {}", self.state_dim, self.action_dim, self.gamma, self.horizon).unwrap();
        for ep in &self.episodes {
            for tr in &ep.transitions {
                write!(s, "{} {}", tr.episode_id, tr.t).unwrap();
                for v in tr.state.iter().chain(&tr.action) {
                    write!(s, " {v}").unwrap();
                }
                write!(s, " {} {}", tr.reward, tr.terminal as u8).unwrap();
                if tr.t + 1 == ep.transitions.len() {
                    for v in &tr.next_state {
                        write!(s, " {v}").unwrap();
                    }
                }
                s.push('\n');
            }
        }
        s
    }

    /// SHA-256 of the serialized text, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
        let header = header?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 {
            return Err(Error::Parse { line: 1, msg: format!("header needs 'n m gamma T', got '{header}'") });
        }
        let perr = |line: usize, what: &str| Error::Parse { line, msg: format!("bad {what}") };
        let n: usize = h[0].parse().map_err(|_| perr(1, "n"))?;
        let m: usize = h[1].parse().map_err(|_| perr(1, "m"))?;
        let gamma: f64 = h[2].parse().map_err(|_| perr(1, "gamma"))?;
        let horizon: usize = h[3].parse().map_err(|_| perr(1, "T"))?;
        let mut ds = TrajectoryDataset::new(n, m, gamma, horizon);
        let row_len = 2 + n + m + 2;
        let mut current: Vec<Transition> = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let closes = fields.len() == row_len + n;
            if fields.len() != row_len && !closes {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected {row_len} fields (or {} on an episode's last row), got {}", row_len + n, fields.len()),
                });
            }
            let id: u64 = fields[0].parse().map_err(|_| perr(line_no, "episode id"))?;
            let t: usize = fields[1].parse().map_err(|_| perr(line_no, "t"))?;
            let reals = parse_reals(&fields[2..2 + n + m + 1], line_no)?;
            let terminal = match fields[2 + n + m + 1] {
                "0" => false,
                "1" => true,
                _ => return Err(perr(line_no, "terminal flag")),
            };
            let expected_t = current.last().map(|p| p.t + 1).unwrap_or(0);
            if current.last().is_some_and(|p| p.episode_id != id) || t != expected_t {
                return Err(Error::Parse { line: line_no, msg: format!("episode {id} row t={t} out of order (expected t={expected_t})") });
            }
            current.push(Transition {
                state: reals[..n].to_vec(),
                action: reals[n..n + m].to_vec(),
                reward: reals[n + m],
                next_state: Vec::new(),
                terminal,
                episode_id: id,
                t,
            });
            if closes {
                let next = parse_reals(&fields[row_len..], line_no)?;
                if ds.episodes.iter().any(|e| e.id == id) {
                    return Err(Error::Parse { line: line_no, msg: format!("episode {id} is not contiguous") });
                }
                ds.episodes.push(Episode { id, transitions: fix_next_states(std::mem::take(&mut current), next) });
            }
        }
        if let Some(last) = current.last() {
            return Err(Error::Parse {
                line: 0,
                msg: format!("episode {} has no final row carrying its successor state", last.episode_id),
            });
        }
        ds.validate()?;
        Ok(ds)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(fs::File::open(path)?)
    }
}

fn parse_reals(fields: &[&str], line: usize) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { line, msg: format!("bad real '{f}'") })
        })
        .collect()
}

fn fix_next_states(mut rows: Vec<Transition>, last_next: Vec<f64>) -> Vec<Transition> {
    for k in 0..rows.len() {
        rows[k].next_state = if k + 1 < rows.len() { rows[k + 1].state.clone() } else { last_next.clone() };
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> TrajectoryDataset {
        let mut ds = TrajectoryDataset::new(2, 1, 0.8, 3);
        for id in [3u64, 5] {
            let mut trs = Vec::new();
            let mut s = vec![0.1 * id as f64, -0.25];
            for t in 0..3 {
                let next = vec![s[0] + 0.1, s[1] * 0.5];
                trs.push(Transition {
                    state: s.clone(),
                    action: vec![1.0 / 3.0],
                    reward: -(t as f64) * 0.7,
                    next_state: next.clone(),
                    terminal: t == 2,
                    episode_id: id,
                    t,
                });
                s = next;
            }
            ds.episodes.push(Episode { id, transitions: trs });
        }
        ds
    }

    #[test]
    fn round_trip() {
        let ds = tiny();
        let back = TrajectoryDataset::read(ds.to_text().as_bytes()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn empty_dataset_is_header_only() {
        let ds = TrajectoryDataset::new(4, 2, 0.8, 50);
        let text = ds.to_text();
        assert_eq!(text, "4 2 0.8 50\n");
        let back = TrajectoryDataset::read(text.as_bytes()).unwrap();
        assert!(back.is_empty());
        assert!(back.to_buffer(10).unwrap().is_empty());
    }

    #[test]
    fn out_of_order_rows_rejected() {
        let text = "1 1 0.8 3\n0 0 0.0 0.0 1 0\n0 2 0.0 0.0 1 1 0\n";
        assert!(matches!(TrajectoryDataset::read(text.as_bytes()), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn split_episode_rejected() {
        let text = "1 1 0.8 3\n0 0 0 0 1 0 1\n1 0 0 0 1 0 1\n0 0 0 0 1 0 1\n";
        assert!(TrajectoryDataset::read(text.as_bytes()).is_err());
    }

    #[test]
    fn one_line_per_transition() {
        let ds = tiny();
        assert_eq!(ds.to_text().lines().count(), 1 + ds.num_transitions());
    }

    #[test]
    fn unfinished_episode_rejected() {
        let text = "1 1 0.8 3\n0 0 0 0 1 0\n";
        assert!(TrajectoryDataset::read(text.as_bytes()).is_err());
    }

    #[test]
    fn buffer_size_is_sum_of_lengths() {
        let ds = tiny();
        let buf = ds.to_buffer(100).unwrap();
        assert_eq!(buf.len(), 6);
        assert_eq!(buf.sampleable_len(), 6);
    }
}
