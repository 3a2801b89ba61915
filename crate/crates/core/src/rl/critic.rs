use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{ema_update, AdamState, GradientBundle, Head, Mlp};

pub(crate) fn concat_cols(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    concatenate(Axis(1), &[a, b]).expect("row counts agree")
}

/// N Q-networks with EMA targets and one optimizer each.
#[derive(Clone, Debug)]
pub struct CriticEnsemble {
    pub online: Vec<Mlp>,
    pub target: Vec<Mlp>,
    pub optim: Vec<AdamState>,
}

impl CriticEnsemble {
    pub fn new<R: Rng + ?Sized>(
        n: usize,
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        lr: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("critic ensemble needs at least one member"));
        }
        let mut dims = vec![state_dim + action_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let nets = (0..n).map(|_| Mlp::new(&dims, Head::Linear, rng)).collect::<Result<Vec<_>>>()?;
        Self::from_nets(nets, lr)
    }

    /// Targets start as exact copies of the online networks.
    pub fn from_nets(nets: Vec<Mlp>, lr: f64) -> Result<Self> {
        if nets.is_empty() {
            return Err(Error::config("critic ensemble needs at least one member"));
        }
        let first = &nets[0];
        for n in &nets {
            if !n.same_shape(first) || n.out_dim() != 1 || n.head() != Head::Linear {
                return Err(Error::config("critic ensemble members must share a scalar linear architecture"));
            }
        }
        let optim = nets.iter().map(|n| AdamState::new(n, lr)).collect();
        Ok(CriticEnsemble { target: nets.clone(), online: nets, optim })
    }

    pub fn len(&self) -> usize {
        self.online.len()
    }

    pub fn is_empty(&self) -> bool {
        self.online.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.online[0].in_dim()
    }

    pub fn set_lr(&mut self, lr: f64) {
        for o in &mut self.optim {
            o.lr = lr;
        }
    }

    /// Q-values of every member, `result[k][i]`.
    pub fn q_all(&self, states: ArrayView2<f64>, actions: ArrayView2<f64>, use_target: bool) -> Result<Vec<Vec<f64>>> {
        let x = concat_cols(states, actions);
        let nets = if use_target { &self.target } else { &self.online };
        nets.iter().map(|n| Ok(n.forward_raw(x.view())?.column(0).to_vec())).collect()
    }

    /// Row-wise minimum over the listed members.
    pub fn q_min(&self, states: ArrayView2<f64>, actions: ArrayView2<f64>, members: &[usize], use_target: bool) -> Result<Vec<f64>> {
        let x = concat_cols(states, actions);
        let nets = if use_target { &self.target } else { &self.online };
        let mut out = vec![f64::INFINITY; x.nrows()];
        for &k in members {
            let q = nets[k].forward_raw(x.view())?;
            for (o, v) in out.iter_mut().zip(q.column(0)) {
                *o = o.min(*v);
            }
        }
        Ok(out)
    }

    /// Row-wise mean and population standard deviation over all online members.
    pub fn q_mean_std(&self, states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        let all = self.q_all(states, actions, false)?;
        let rows = states.nrows();
        let n = all.len() as f64;
        let mut mean = vec![0.0; rows];
        let mut std = vec![0.0; rows];
        for i in 0..rows {
            let mu = all.iter().map(|q| q[i]).sum::<f64>() / n;
            let var = all.iter().map(|q| (q[i] - mu).powi(2)).sum::<f64>() / n;
            mean[i] = mu;
            std[i] = var.sqrt();
        }
        Ok((mean, std))
    }

    /// Random subset of `size` distinct members.
    pub fn draw_subset<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Result<Vec<usize>> {
        if size == 0 || size > self.len() {
            return Err(Error::config(format!("subset of {size} from {} critics", self.len())));
        }
        let mut idx = sample(rng, self.len(), size).into_vec();
        idx.sort_unstable();
        Ok(idx)
    }

    pub fn step(&mut self, k: usize, grads: &GradientBundle) -> Result<()> {
        self.optim[k].step(&mut self.online[k], grads)
    }

    pub fn update_targets(&mut self, tau: f64) -> Result<()> {
        for (t, o) in self.target.iter_mut().zip(&self.online) {
            ema_update(t, o, tau)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use ndarray::array;

    #[test]
    fn subset_is_distinct_and_sized() {
        let mut rng = rng_from_seed(1);
        let e = CriticEnsemble::new(5, 2, 1, &[4], 1e-3, &mut rng).unwrap();
        for _ in 0..50 {
            let z = e.draw_subset(2, &mut rng).unwrap();
            assert_eq!(z.len(), 2);
            assert!(z[0] < z[1] && z[1] < 5);
        }
        assert!(e.draw_subset(6, &mut rng).is_err());
    }

    #[test]
    fn min_and_spread_agree_with_members() {
        let mut rng = rng_from_seed(2);
        let e = CriticEnsemble::new(3, 2, 1, &[4], 1e-3, &mut rng).unwrap();
        let s = array![[0.1, 0.2], [-0.3, 0.9]];
        let a = array![[0.5], [-0.5]];
        let all = e.q_all(s.view(), a.view(), false).unwrap();
        let min = e.q_min(s.view(), a.view(), &[0, 1, 2], false).unwrap();
        let (mean, std) = e.q_mean_std(s.view(), a.view()).unwrap();
        for i in 0..2 {
            let col: Vec<f64> = all.iter().map(|q| q[i]).collect();
            assert_eq!(min[i], col.iter().cloned().fold(f64::INFINITY, f64::min));
            let mu = col.iter().sum::<f64>() / 3.0;
            assert!((mean[i] - mu).abs() < 1e-12);
            let var = col.iter().map(|q| (q - mu).powi(2)).sum::<f64>() / 3.0;
            assert!((std[i] - var.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn targets_start_equal() {
        let mut rng = rng_from_seed(3);
        let e = CriticEnsemble::new(2, 2, 1, &[4], 1e-3, &mut rng).unwrap();
        assert_eq!(e.online, e.target);
    }
}
