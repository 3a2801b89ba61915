use crate::error::{Error, Result};

/// One environment step.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
    pub episode_id: u64,
    pub t: usize,
}

impl Transition {
    pub fn is_finite(&self) -> bool {
        self.reward.is_finite()
            && self.state.iter().chain(&self.action).chain(&self.next_state).all(|v| v.is_finite())
    }
}

/// Discounted returns-to-go `G_t = r_t + gamma * G_{t+1}` for one complete episode.
pub fn mc_returns(episode: &[Transition], gamma: f64) -> Result<Vec<f64>> {
    if let Some(first) = episode.first() {
        for (k, tr) in episode.iter().enumerate() {
            if tr.episode_id != first.episode_id || tr.t != first.t + k {
                return Err(Error::config(format!(
                    "episode {} is not contiguous at position {k} (id {}, t {})",
                    first.episode_id, tr.episode_id, tr.t
                )));
            }
        }
    }
    let mut out = vec![0.0; episode.len()];
    let mut acc = 0.0;
    for (g, tr) in out.iter_mut().zip(episode).rev() {
        acc = tr.reward + gamma * acc;
        *g = acc;
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) fn episode_with_rewards(id: u64, rewards: &[f64]) -> Vec<Transition> {
    let n = rewards.len();
    rewards
        .iter()
        .enumerate()
        .map(|(t, &r)| Transition {
            state: vec![t as f64, id as f64],
            action: vec![0.1 * t as f64],
            reward: r,
            next_state: vec![t as f64 + 1.0, id as f64],
            terminal: t + 1 == n,
            episode_id: id,
            t,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_rewards() {
        let ep = episode_with_rewards(0, &[0.0; 5]);
        assert_eq!(mc_returns(&ep, 0.8).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn gamma_zero_is_reward() {
        let ep = episode_with_rewards(0, &[1.0, -2.0, 3.0]);
        assert_eq!(mc_returns(&ep, 0.0).unwrap(), vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn hand_example() {
        let ep = episode_with_rewards(0, &[0.0, 0.0, 1.0]);
        let g = mc_returns(&ep, 0.8).unwrap();
        let want = [0.64, 0.8, 1.0];
        for (a, b) in g.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn non_contiguous_rejected() {
        let mut ep = episode_with_rewards(0, &[1.0, 1.0, 1.0]);
        ep[2].t = 5;
        assert!(matches!(mc_returns(&ep, 0.8), Err(Error::Config(_))));
        let mut ep = episode_with_rewards(0, &[1.0, 1.0]);
        ep[1].episode_id = 9;
        assert!(mc_returns(&ep, 0.8).is_err());
    }

    proptest! {
        #[test]
        fn matches_forward_sum(rewards in prop::collection::vec(-3.0f64..3.0, 1..60), gamma in 0.0f64..1.0) {
            let ep = episode_with_rewards(1, &rewards);
            let g = mc_returns(&ep, gamma).unwrap();
            for t in 0..rewards.len() {
                let brute: f64 = (t..rewards.len()).map(|k| gamma.powi((k - t) as i32) * rewards[k]).sum();
                prop_assert!((g[t] - brute).abs() <= 1e-12 * (1.0 + brute.abs()));
            }
        }
    }
}
