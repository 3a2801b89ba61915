use std::collections::{HashSet, VecDeque};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use super::transition::Transition;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
struct Span {
    id: u64,
    len: usize,
    complete: bool,
}

/// Episode-contiguous transition store with whole-episode eviction.
///
/// Only complete episodes are eligible for sampling, so an n-step window is
/// always read against the episode's true end.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    state_dim: usize,
    action_dim: usize,
    capacity: usize,
    data: VecDeque<Transition>,
    spans: VecDeque<Span>,
    live_ids: HashSet<u64>,
    complete_len: usize,
}

/// Which buffer a sampled row came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Online,
    Offline,
}

/// Rows of h-step windows. Row `i` bootstraps from `next_states[i]` with
/// discount `discounts[i] = gamma^steps[i]` unless `terminal[i]`.
#[derive(Clone, Debug)]
pub struct NStepBatch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub returns: Vec<f64>,
    pub next_states: Array2<f64>,
    pub steps: Vec<usize>,
    pub discounts: Vec<f64>,
    pub terminal: Vec<bool>,
    pub sources: Vec<Source>,
}

impl NStepBatch {
    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }
}

#[derive(Clone, Debug)]
struct Row {
    state: Vec<f64>,
    action: Vec<f64>,
    ret: f64,
    next_state: Vec<f64>,
    steps: usize,
    discount: f64,
    terminal: bool,
    source: Source,
}

impl ReplayBuffer {
    pub fn new(state_dim: usize, action_dim: usize, capacity: usize) -> Self {
        ReplayBuffer {
            state_dim,
            action_dim,
            capacity: capacity.max(1),
            data: VecDeque::new(),
            spans: VecDeque::new(),
            live_ids: HashSet::new(),
            complete_len: 0,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Transitions belonging to complete episodes.
    pub fn sampleable_len(&self) -> usize {
        self.complete_len
    }

    pub fn is_ready(&self) -> bool {
        self.complete_len > 0
    }

    pub fn num_episodes(&self) -> usize {
        self.spans.len()
    }

    /// `(start offset, length)` of a stored episode.
    pub fn span(&self, id: u64) -> Option<(usize, usize)> {
        let mut start = 0;
        for s in &self.spans {
            if s.id == id {
                return Some((start, s.len));
            }
            start += s.len;
        }
        None
    }

    pub fn is_complete(&self, id: u64) -> bool {
        self.spans.iter().any(|s| s.id == id && s.complete)
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.data.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.data.iter()
    }

    pub fn push(&mut self, tr: Transition) -> Result<()> {
        if tr.state.len() != self.state_dim || tr.next_state.len() != self.state_dim || tr.action.len() != self.action_dim {
            return Err(Error::config(format!(
                "transition dims (s {}, a {}, s' {}) do not match buffer (n {}, m {})",
                tr.state.len(),
                tr.action.len(),
                tr.next_state.len(),
                self.state_dim,
                self.action_dim
            )));
        }
        if !tr.is_finite() {
            return Err(Error::numerical("transition", f64::NAN));
        }
        let continues = match self.spans.back() {
            Some(last) if !last.complete && last.id == tr.episode_id => {
                let last_t = self.data.back().map(|p| p.t).unwrap_or(0);
                if tr.t != last_t + 1 {
                    return Err(Error::config(format!("episode {} jumps from t={last_t} to t={}", tr.episode_id, tr.t)));
                }
                true
            }
            _ => false,
        };
        if !continues {
            self.end_episode();
            if self.live_ids.contains(&tr.episode_id) {
                return Err(Error::config(format!("episode {} is not contiguous", tr.episode_id)));
            }
            if tr.t != 0 {
                return Err(Error::config(format!("episode {} starts at t={} (expected 0)", tr.episode_id, tr.t)));
            }
        }
        while self.data.len() + 1 > self.capacity {
            self.evict_oldest()?;
        }
        let terminal = tr.terminal;
        if continues {
            self.spans.back_mut().unwrap().len += 1;
        } else {
            self.live_ids.insert(tr.episode_id);
            self.spans.push_back(Span { id: tr.episode_id, len: 1, complete: false });
        }
        self.data.push_back(tr);
        if terminal {
            self.end_episode();
        }
        Ok(())
    }

    /// Marks the episode currently being written as complete.
    pub fn end_episode(&mut self) {
        if let Some(last) = self.spans.back_mut() {
            if !last.complete {
                last.complete = true;
                self.complete_len += last.len;
            }
        }
    }

    fn evict_oldest(&mut self) -> Result<()> {
        match self.spans.front() {
            Some(s) if s.complete => {
                let s = self.spans.pop_front().unwrap();
                self.data.drain(..s.len);
                self.live_ids.remove(&s.id);
                self.complete_len -= s.len;
                Ok(())
            }
            _ => Err(Error::config(format!("episode longer than buffer capacity {}", self.capacity))),
        }
    }

    fn window(&self, start: usize, h: usize, gamma: f64, source: Source) -> Row {
        let first = &self.data[start];
        let mut ret = 0.0;
        let mut discount = 1.0;
        let mut steps = 0;
        let mut terminal = false;
        let mut last = first;
        for i in 0..h {
            let tr = &self.data[start + i];
            ret += discount * tr.reward;
            discount *= gamma;
            steps += 1;
            last = tr;
            if tr.terminal {
                terminal = true;
                break;
            }
            let next = start + i + 1;
            if next >= self.complete_len || self.data[next].episode_id != tr.episode_id {
                break;
            }
        }
        Row {
            state: first.state.clone(),
            action: first.action.clone(),
            ret,
            next_state: last.next_state.clone(),
            steps,
            discount,
            terminal,
            source,
        }
    }

    fn sample_rows<R: Rng + ?Sized>(&self, count: usize, h: usize, gamma: f64, source: Source, rng: &mut R) -> Vec<Row> {
        (0..count)
            .map(|_| {
                let start = rng.random_range(0..self.complete_len);
                self.window(start, h, gamma, source)
            })
            .collect()
    }

    /// The h-step window starting at `index`, truncated at the episode end.
    pub fn nstep_at(&self, index: usize, h: usize, gamma: f64) -> Result<NStepBatch> {
        if index >= self.complete_len {
            return Err(Error::NotReady(format!("index {index} is not in a complete episode")));
        }
        Ok(assemble(vec![self.window(index, h.max(1), gamma, Source::Online)], self.state_dim, self.action_dim))
    }

    /// Uniform over start indices of complete episodes.
    pub fn sample_nstep<R: Rng + ?Sized>(&self, batch: usize, h: usize, gamma: f64, rng: &mut R) -> Result<NStepBatch> {
        if !self.is_ready() {
            return Err(Error::NotReady("replay buffer holds no complete episode".into()));
        }
        let rows = self.sample_rows(batch, h.max(1), gamma, Source::Online, rng);
        Ok(assemble(rows, self.state_dim, self.action_dim))
    }

    /// Uniform minibatch of raw stored transitions (complete episodes only).
    pub fn sample_transitions<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if !self.is_ready() {
            return Err(Error::NotReady("replay buffer holds no complete episode".into()));
        }
        Ok((0..batch).map(|_| &self.data[rng.random_range(0..self.complete_len)]).collect())
    }
}

fn assemble(rows: Vec<Row>, n: usize, m: usize) -> NStepBatch {
    let b = rows.len();
    let mut states = Array2::zeros((b, n));
    let mut actions = Array2::zeros((b, m));
    let mut next_states = Array2::zeros((b, n));
    let mut returns = Vec::with_capacity(b);
    let mut steps = Vec::with_capacity(b);
    let mut discounts = Vec::with_capacity(b);
    let mut terminal = Vec::with_capacity(b);
    let mut sources = Vec::with_capacity(b);
    for (i, r) in rows.into_iter().enumerate() {
        states.row_mut(i).iter_mut().zip(&r.state).for_each(|(d, s)| *d = *s);
        actions.row_mut(i).iter_mut().zip(&r.action).for_each(|(d, s)| *d = *s);
        next_states.row_mut(i).iter_mut().zip(&r.next_state).for_each(|(d, s)| *d = *s);
        returns.push(r.ret);
        steps.push(r.steps);
        discounts.push(r.discount);
        terminal.push(r.terminal);
        sources.push(r.source);
    }
    NStepBatch { states, actions, returns, next_states, steps, discounts, terminal, sources }
}

/// Exactly `ceil(B/2)` offline and `floor(B/2)` online rows, shuffled. Falls
/// back to a single buffer when the other has no complete episode.
pub fn sample_mixed<R: Rng + ?Sized>(
    online: &ReplayBuffer,
    offline: &ReplayBuffer,
    batch: usize,
    h: usize,
    gamma: f64,
    rng: &mut R,
) -> Result<NStepBatch> {
    if online.state_dim != offline.state_dim || online.action_dim != offline.action_dim {
        return Err(Error::config("online and offline buffers have different dims"));
    }
    let h = h.max(1);
    let (n_off, n_on) = match (offline.is_ready(), online.is_ready()) {
        (true, true) => (batch.div_ceil(2), batch / 2),
        (true, false) => (batch, 0),
        (false, true) => (0, batch),
        (false, false) => return Err(Error::NotReady("both replay buffers are empty".into())),
    };
    let mut rows = Vec::with_capacity(batch);
    if n_off > 0 {
        rows.extend(offline.sample_rows(n_off, h, gamma, Source::Offline, rng));
    }
    if n_on > 0 {
        rows.extend(online.sample_rows(n_on, h, gamma, Source::Online, rng));
    }
    rows.shuffle(rng);
    Ok(assemble(rows, online.state_dim, online.action_dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replay::transition::episode_with_rewards;
    use crate::rng::rng_from_seed;

    fn buffer_with(episodes: &[Vec<Transition>], capacity: usize) -> ReplayBuffer {
        let mut b = ReplayBuffer::new(2, 1, capacity);
        for ep in episodes {
            for tr in ep {
                b.push(tr.clone()).unwrap();
            }
        }
        b
    }

    #[test]
    fn push_into_empty() {
        let mut b = ReplayBuffer::new(2, 1, 10);
        b.push(episode_with_rewards(0, &[1.0])[0].clone()).unwrap();
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn dim_mismatch_rejected() {
        let mut b = ReplayBuffer::new(3, 1, 10);
        assert!(matches!(b.push(episode_with_rewards(0, &[1.0])[0].clone()), Err(Error::Config(_))));
    }

    #[test]
    fn whole_episode_eviction() {
        let b = buffer_with(&[episode_with_rewards(0, &[1.0; 4]), episode_with_rewards(1, &[1.0; 4])], 8);
        assert_eq!(b.len(), 8);
        let mut b = b;
        b.push(episode_with_rewards(2, &[1.0])[0].clone()).unwrap();
        assert_eq!(b.len(), 5);
        assert!(b.span(0).is_none());
        assert_eq!(b.span(1), Some((0, 4)));
        assert_eq!(b.span(2), Some((4, 1)));
    }

    #[test]
    fn episode_span_covers_all_steps() {
        let b = buffer_with(&[episode_with_rewards(7, &[0.5; 50])], 1000);
        assert_eq!(b.span(7), Some((0, 50)));
    }

    #[test]
    fn non_contiguous_episode_rejected() {
        let ep = episode_with_rewards(0, &[1.0, 1.0, 1.0]);
        let mut b = ReplayBuffer::new(2, 1, 100);
        let mut first = ep[0].clone();
        first.terminal = false;
        b.push(first).unwrap();
        b.push(episode_with_rewards(1, &[1.0])[0].clone()).unwrap();
        assert!(b.push(ep[1].clone()).is_err());
    }

    #[test]
    fn empty_buffer_not_ready() {
        let b = ReplayBuffer::new(2, 1, 10);
        let mut rng = rng_from_seed(0);
        assert!(matches!(b.sample_nstep(4, 3, 0.8, &mut rng), Err(Error::NotReady(_))));
    }

    #[test]
    fn incomplete_episode_is_not_sampled() {
        let mut ep = episode_with_rewards(0, &[1.0; 3]);
        ep[2].terminal = false;
        let b = buffer_with(&[ep], 100);
        assert!(!b.is_ready());
        let mut b = b;
        b.end_episode();
        assert!(b.is_ready());
    }

    #[test]
    fn one_step_reduction() {
        let b = buffer_with(&[episode_with_rewards(0, &[1.0, 2.0, 3.0, 4.0])], 100);
        let w = b.nstep_at(1, 1, 0.8).unwrap();
        assert_eq!(w.returns, vec![2.0]);
        assert_eq!(w.next_states.row(0).to_vec(), vec![2.0, 0.0]);
        assert_eq!(w.steps, vec![1]);
        assert!(!w.terminal[0]);
    }

    #[test]
    fn three_step_return() {
        let b = buffer_with(&[episode_with_rewards(0, &[1.0, 1.0, 1.0, 1.0, 1.0])], 100);
        let w = b.nstep_at(0, 3, 0.8).unwrap();
        assert!((w.returns[0] - 2.44).abs() < 1e-15);
        assert_eq!(w.next_states.row(0).to_vec(), vec![3.0, 0.0]);
        assert_eq!(w.steps, vec![3]);
        assert!((w.discounts[0] - 0.512).abs() < 1e-15);
    }

    #[test]
    fn window_truncated_at_terminal() {
        let b = buffer_with(&[episode_with_rewards(0, &[0.0; 49].iter().copied().chain([5.0]).collect::<Vec<_>>())], 100);
        let w = b.nstep_at(49, 3, 0.8).unwrap();
        assert_eq!(w.returns, vec![5.0]);
        assert_eq!(w.steps, vec![1]);
        assert_eq!(w.discounts, vec![0.8]);
        assert!(w.terminal[0]);
    }

    #[test]
    fn window_stops_at_episode_boundary_without_terminal() {
        let mut ep0 = episode_with_rewards(0, &[1.0, 2.0]);
        ep0[1].terminal = false;
        let b = buffer_with(&[ep0, episode_with_rewards(1, &[100.0, 100.0])], 100);
        let w = b.nstep_at(1, 3, 0.5).unwrap();
        assert_eq!(w.returns, vec![2.0]);
        assert_eq!(w.steps, vec![1]);
        assert!(!w.terminal[0]);
    }

    #[test]
    fn sampled_rows_recompute_from_raw_rewards() {
        let eps: Vec<_> = (0..5).map(|k| episode_with_rewards(k, &(0..7).map(|t| (t * (k + 1)) as f64).collect::<Vec<_>>())).collect();
        let b = buffer_with(&eps, 1000);
        let mut rng = rng_from_seed(3);
        let batch = b.sample_nstep(200, 3, 0.8, &mut rng).unwrap();
        for i in 0..batch.len() {
            let t = batch.states[[i, 0]] as usize;
            let id = batch.states[[i, 1]] as u64;
            let rewards: Vec<f64> = (0..7).map(|t| (t * (id as usize + 1)) as f64).collect();
            let h = 3.min(7 - t);
            let brute: f64 = (0..h).map(|k| 0.8f64.powi(k as i32) * rewards[t + k]).sum();
            assert_eq!(batch.returns[i], brute);
            assert_eq!(batch.steps[i], h);
            assert_eq!(batch.terminal[i], t + h == 7);
        }
    }

    #[test]
    fn mixed_split_is_exact() {
        let off = buffer_with(&[episode_with_rewards(0, &[1.0; 10])], 100);
        let on = buffer_with(&[episode_with_rewards(0, &[1.0; 10])], 100);
        let mut rng = rng_from_seed(1);
        let batch = sample_mixed(&on, &off, 1024, 3, 0.8, &mut rng).unwrap();
        let offline = batch.sources.iter().filter(|s| **s == Source::Offline).count();
        assert_eq!((offline, batch.len() - offline), (512, 512));
        let odd = sample_mixed(&on, &off, 5, 3, 0.8, &mut rng).unwrap();
        assert_eq!(odd.sources.iter().filter(|s| **s == Source::Offline).count(), 3);
    }

    #[test]
    fn mixed_falls_back_to_offline() {
        let off = buffer_with(&[episode_with_rewards(0, &[1.0; 10])], 100);
        let on = ReplayBuffer::new(2, 1, 100);
        let mut rng = rng_from_seed(1);
        let batch = sample_mixed(&on, &off, 1024, 3, 0.8, &mut rng).unwrap();
        assert!(batch.sources.iter().all(|s| *s == Source::Offline));
        assert_eq!(batch.len(), 1024);
        let empty = ReplayBuffer::new(2, 1, 100);
        assert!(matches!(sample_mixed(&empty, &on, 8, 3, 0.8, &mut rng), Err(Error::NotReady(_))));
    }
}
