use ndarray::{s, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{split_gaussian, Head, Mlp};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    /// Tanh-squashed Gaussian (SAC).
    Stochastic,
    /// Tanh output (TD3).
    Deterministic,
}

/// `ln(1 - tanh(u)^2)` without cancellation for large `|u|`.
pub(crate) fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Actor {
    pub net: Mlp,
    pub kind: PolicyKind,
}

/// Actions drawn from a policy together with everything needed to
/// differentiate through the draw.
#[derive(Clone, Debug)]
pub struct PolicySample {
    pub actions: Array2<f64>,
    /// Zero for deterministic policies.
    pub log_probs: Vec<f64>,
}

impl Actor {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_dim: usize, hidden: &[usize], kind: PolicyKind, rng: &mut R) -> Result<Self> {
        let (out, head) = match kind {
            PolicyKind::Stochastic => (2 * action_dim, Head::TanhGaussian),
            PolicyKind::Deterministic => (action_dim, Head::Tanh),
        };
        let mut dims = vec![state_dim];
        dims.extend_from_slice(hidden);
        dims.push(out);
        Ok(Actor { net: Mlp::new(&dims, head, rng)?, kind })
    }

    pub fn from_net(net: Mlp, kind: PolicyKind) -> Result<Self> {
        let ok = matches!(
            (kind, net.head()),
            (PolicyKind::Stochastic, Head::TanhGaussian) | (PolicyKind::Deterministic, Head::Tanh)
        );
        if !ok {
            return Err(Error::config(format!("{kind:?} policy cannot use a {:?} head", net.head())));
        }
        Ok(Actor { net, kind })
    }

    pub fn state_dim(&self) -> usize {
        self.net.in_dim()
    }

    pub fn action_dim(&self) -> usize {
        match self.kind {
            PolicyKind::Stochastic => self.net.out_dim() / 2,
            PolicyKind::Deterministic => self.net.out_dim(),
        }
    }

    /// `tanh(mean)` for stochastic policies, `tanh(raw)` otherwise.
    pub fn mean_actions(&self, states: ArrayView2<f64>) -> Result<Array2<f64>> {
        let raw = self.net.forward_raw(states)?;
        let m = self.action_dim();
        Ok(raw.slice(s![.., ..m]).mapv(f64::tanh))
    }

    pub fn mean_action(&self, state: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, state.len()), state).map_err(|e| Error::config(e.to_string()))?;
        Ok(self.mean_actions(x)?.row(0).to_vec())
    }

    /// Reparameterized draw `tanh(mean + std * noise)`; deterministic
    /// policies ignore `noise`.
    pub fn actions_from_noise(&self, states: ArrayView2<f64>, noise: &Array2<f64>) -> Result<PolicySample> {
        let raw = self.net.forward_raw(states)?;
        Ok(self.sample_from_raw(&raw, noise))
    }

    pub(crate) fn sample_from_raw(&self, raw: &Array2<f64>, noise: &Array2<f64>) -> PolicySample {
        match self.kind {
            PolicyKind::Deterministic => PolicySample { actions: raw.mapv(f64::tanh), log_probs: vec![0.0; raw.nrows()] },
            PolicyKind::Stochastic => {
                let (mean, log_std) = split_gaussian(raw);
                let mut actions = Array2::zeros(mean.raw_dim());
                let mut log_probs = vec![0.0; mean.nrows()];
                for i in 0..mean.nrows() {
                    let mut lp = 0.0;
                    for j in 0..mean.ncols() {
                        let e = noise[[i, j]];
                        let u = mean[[i, j]] + log_std[[i, j]].exp() * e;
                        actions[[i, j]] = u.tanh();
                        lp += -0.5 * e * e - log_std[[i, j]] - HALF_LN_2PI - log_one_minus_tanh_sq(u);
                    }
                    log_probs[i] = lp;
                }
                PolicySample { actions, log_probs }
            }
        }
    }

    pub fn draw_noise<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, self.action_dim()), || rng.sample(StandardNormal))
    }

    pub fn sample_actions<R: Rng + ?Sized>(&self, states: ArrayView2<f64>, rng: &mut R) -> Result<PolicySample> {
        let noise = match self.kind {
            PolicyKind::Stochastic => self.draw_noise(states.nrows(), rng),
            PolicyKind::Deterministic => Array2::zeros((states.nrows(), self.action_dim())),
        };
        self.actions_from_noise(states, &noise)
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, state.len()), state).map_err(|e| Error::config(e.to_string()))?;
        Ok(self.sample_actions(x, rng)?.actions.row(0).to_vec())
    }

    /// Deterministic policy acting with the mean of this one.
    pub fn to_deterministic(&self) -> Actor {
        if self.kind == PolicyKind::Deterministic {
            return self.clone();
        }
        let m = self.action_dim();
        let mut net = self.net.clone();
        let last = net.layers_mut().last_mut().unwrap();
        last.weight = last.weight.slice(s![..m, ..]).to_owned();
        last.bias = last.bias.slice(s![..m]).to_owned();
        let layers = net.layers().to_vec();
        let net = Mlp::from_layers(layers, net.activation(), Head::Tanh).expect("sliced head stays consistent");
        Actor { net, kind: PolicyKind::Deterministic }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn stable_log_jacobian() {
        for u in [-30.0, -3.0, -0.1, 0.0, 0.4, 2.0, 25.0] {
            let direct = (1.0 - f64::tanh(u).powi(2)).ln();
            let stable = log_one_minus_tanh_sq(u);
            if direct.is_finite() && u.abs() < 10.0 {
                assert!((direct - stable).abs() < 1e-9, "{u}: {direct} vs {stable}");
            }
            assert!(stable.is_finite());
        }
    }

    #[test]
    fn zero_final_layer_gives_zero_action() {
        let mut rng = rng_from_seed(0);
        let mut actor = Actor::new(4, 2, &[8, 8], PolicyKind::Deterministic, &mut rng).unwrap();
        actor.net.zero_final_layer();
        assert_eq!(actor.mean_action(&[0.3, 0.1, -0.5, 2.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn deterministic_view_keeps_mean() {
        let mut rng = rng_from_seed(4);
        let actor = Actor::new(3, 2, &[5], PolicyKind::Stochastic, &mut rng).unwrap();
        let det = actor.to_deterministic();
        let s = [0.2, -0.7, 1.1];
        assert_eq!(actor.mean_action(&s).unwrap(), det.mean_action(&s).unwrap());
    }

    #[test]
    fn log_prob_matches_density_of_squashed_gaussian() {
        // 1-D check of the change of variables against a numerically integrated density
        let mut rng = rng_from_seed(9);
        let actor = Actor::new(1, 1, &[4], PolicyKind::Stochastic, &mut rng).unwrap();
        let states = Array2::from_elem((1, 1), 0.3);
        let raw = actor.net.forward_raw(states.view()).unwrap();
        let (mu, ls) = (raw[[0, 0]], raw[[0, 1]].clamp(-5.0, 2.0));
        let sigma = ls.exp();
        let e = 0.37;
        let sample = actor.actions_from_noise(states.view(), &Array2::from_elem((1, 1), e)).unwrap();
        let a = sample.actions[[0, 0]];
        let u = a.atanh();
        let gauss = (-(u - mu).powi(2) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let density = gauss / (1.0 - a * a);
        assert!((sample.log_probs[0] - density.ln()).abs() < 1e-9);
    }
}
