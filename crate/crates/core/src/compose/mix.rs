use ndarray::{Array2, ArrayView2};

use crate::error::Result;
use crate::rl::CriticEnsemble;

/// Uncertainty and weight bounds of the uncertainty-weighted mixer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheqBounds {
    pub u: [f64; 2],
    pub lambda: [f64; 2],
}

impl CheqBounds {
    /// Clipped linear map from ensemble spread `u` to the online weight:
    /// `u <= u_min` gives `lambda_max`, `u >= u_max` gives `lambda_min`.
    pub fn lambda(&self, u: f64) -> f64 {
        let [u_lo, u_hi] = self.u;
        let [l_lo, l_hi] = self.lambda;
        if u.is_nan() || u >= u_hi {
            return l_lo;
        }
        if u <= u_lo {
            return l_hi;
        }
        let frac = (u - u_lo) / (u_hi - u_lo);
        (l_hi + frac * (l_lo - l_hi)).clamp(l_lo, l_hi)
    }
}

/// Whether the offline proposal wins; ties go to the online action.
pub fn ibrl_prefers_offline(q_off: f64, q_on: f64) -> bool {
    q_off > q_on
}

/// Row-wise choice between proposals by the ensemble-minimum Q. Returns
/// the chosen actions and, per row, whether the online action was taken.
pub fn mix_ibrl(
    states: ArrayView2<f64>,
    a_off: &Array2<f64>,
    a_on: &Array2<f64>,
    critics: &CriticEnsemble,
    use_target: bool,
) -> Result<(Array2<f64>, Vec<bool>)> {
    let all: Vec<usize> = (0..critics.len()).collect();
    let q_off = critics.q_min(states, a_off.view(), &all, use_target)?;
    let q_on = critics.q_min(states, a_on.view(), &all, use_target)?;
    let mut out = a_on.clone();
    let mut took_on = vec![true; a_on.nrows()];
    for i in 0..a_on.nrows() {
        if ibrl_prefers_offline(q_off[i], q_on[i]) {
            out.row_mut(i).assign(&a_off.row(i));
            took_on[i] = false;
        }
    }
    Ok((out, took_on))
}

/// `(1 - lambda) a_off + lambda a_on` with lambda from the spread of the
/// online critics at `(s, a_on)`.
pub fn mix_cheq(
    states: ArrayView2<f64>,
    a_off: &Array2<f64>,
    a_on: &Array2<f64>,
    critics: &CriticEnsemble,
    bounds: &CheqBounds,
) -> Result<(Array2<f64>, Vec<f64>)> {
    let (_, std) = critics.q_mean_std(states, a_on.view())?;
    let lambdas: Vec<f64> = std.iter().map(|&u| bounds.lambda(u)).collect();
    let mut out = a_on.clone();
    for (i, &l) in lambdas.iter().enumerate() {
        for j in 0..out.ncols() {
            out[[i, j]] = (1.0 - l) * a_off[[i, j]] + l * a_on[[i, j]];
        }
    }
    Ok((out, lambdas))
}

/// `clip(a_off + a_on, -1, 1)`.
pub fn mix_residual(a_off: &Array2<f64>, a_on: &Array2<f64>) -> Array2<f64> {
    let mut out = a_off + a_on;
    out.mapv_inplace(|v| v.clamp(-1.0, 1.0));
    out
}
