use ndarray::{s, Array2};

use super::mlp::{GradientBundle, Head, Mlp, LOG_STD_MAX, LOG_STD_MIN};
use crate::error::{ensure_finite, Error, Result};

/// Actions are pulled inside the open interval before `atanh`.
pub const ACTION_CLAMP: f64 = 1.0 - 1e-6;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Single-network losses with closed-form output gradients. Losses that
/// couple several networks live in [`crate::losses`].
#[derive(Clone, Copy, Debug)]
pub enum LossSpec<'a> {
    /// Mean over rows of `sum_j (raw_j - target_j)^2` (critic regression).
    SquaredError { targets: &'a Array2<f64> },
    /// Mean negative log-likelihood of `actions` under a tanh-Gaussian head.
    GaussianNll { actions: &'a Array2<f64> },
    /// Mean over rows of `sum_j (tanh(raw_j) - a_j)^2`.
    TanhMse { actions: &'a Array2<f64> },
}

/// Loss value and gradient of the raw network output, before backprop.
pub fn output_loss(mlp: &Mlp, raw: &Array2<f64>, spec: LossSpec<'_>) -> Result<(f64, Array2<f64>)> {
    let rows = raw.nrows();
    if rows == 0 {
        return Err(Error::config("empty batch"));
    }
    let inv = 1.0 / rows as f64;
    match spec {
        LossSpec::SquaredError { targets } => {
            if targets.dim() != raw.dim() {
                return Err(Error::config(format!("targets {:?} vs outputs {:?}", targets.dim(), raw.dim())));
            }
            let diff = raw - targets;
            let loss = diff.iter().map(|d| d * d).sum::<f64>() * inv;
            Ok((loss, diff * (2.0 * inv)))
        }
        LossSpec::GaussianNll { actions } => {
            if mlp.head() != Head::TanhGaussian {
                return Err(Error::config("gaussian NLL needs a tanh-gaussian head"));
            }
            let m = raw.ncols() / 2;
            if actions.dim() != (rows, m) {
                return Err(Error::config(format!("actions {:?} vs policy width {m}", actions.dim())));
            }
            let mut grad = Array2::zeros(raw.raw_dim());
            let mut loss = 0.0;
            for i in 0..rows {
                for j in 0..m {
                    let a = actions[[i, j]].clamp(-ACTION_CLAMP, ACTION_CLAMP);
                    let u = a.atanh();
                    let mu = raw[[i, j]];
                    let ls_raw = raw[[i, m + j]];
                    let ls = ls_raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
                    let sigma = ls.exp();
                    let z = (u - mu) / sigma;
                    loss += 0.5 * z * z + ls + HALF_LN_2PI + (1.0 - a * a).ln();
                    grad[[i, j]] = -z / sigma * inv;
                    if (LOG_STD_MIN..=LOG_STD_MAX).contains(&ls_raw) {
                        grad[[i, m + j]] = (1.0 - z * z) * inv;
                    }
                }
            }
            Ok((loss * inv, grad))
        }
        LossSpec::TanhMse { actions } => {
            if actions.dim() != raw.dim() {
                return Err(Error::config(format!("actions {:?} vs outputs {:?}", actions.dim(), raw.dim())));
            }
            let mut grad = Array2::zeros(raw.raw_dim());
            let mut loss = 0.0;
            ndarray::Zip::from(&mut grad).and(raw).and(actions).for_each(|g, &o, &a| {
                let t = o.tanh();
                loss += (t - a) * (t - a);
                *g = 2.0 * (t - a) * (1.0 - t * t) * inv;
            });
            Ok((loss * inv, grad))
        }
    }
}

/// Analytic gradient of the mean batch loss with respect to every parameter.
pub fn backprop(mlp: &Mlp, spec: LossSpec<'_>, inputs: &Array2<f64>) -> Result<(f64, GradientBundle)> {
    let cache = mlp.forward_batch(inputs)?;
    let (loss, d_out) = output_loss(mlp, &cache.output, spec)?;
    ensure_finite(spec_name(&spec), loss)?;
    let (grads, _) = mlp.backward(&cache, &d_out, false);
    Ok((loss, grads))
}

fn spec_name(spec: &LossSpec<'_>) -> &'static str {
    match spec {
        LossSpec::SquaredError { .. } => "squared-error loss",
        LossSpec::GaussianNll { .. } => "gaussian NLL loss",
        LossSpec::TanhMse { .. } => "tanh MSE loss",
    }
}

/// Column slice helper shared by policy code: `(means, clamped log-stds)`.
pub(crate) fn split_gaussian(raw: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let m = raw.ncols() / 2;
    let mean = raw.slice(s![.., ..m]).to_owned();
    let log_std = raw.slice(s![.., m..]).mapv(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
    (mean, log_std)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Activation;
    use crate::tensor::Linear;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_prediction_has_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mlp = Mlp::new(&[3, 4, 1], Head::Linear, &mut rng).unwrap();
        let x = array![[0.1, 0.2, 0.3], [1.0, -1.0, 0.5]];
        let targets = mlp.forward_raw(x.view()).unwrap();
        let (loss, g) = backprop(&mlp, LossSpec::SquaredError { targets: &targets }, &x).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn nan_loss_reports_term() {
        let layer = Linear { weight: array![[f64::MAX]], bias: array![0.0] };
        let mlp = Mlp::from_layers(vec![layer], Activation::Relu, Head::Linear).unwrap();
        let x = array![[f64::MAX]];
        let t = array![[0.0]];
        match backprop(&mlp, LossSpec::SquaredError { targets: &t }, &x) {
            Err(Error::Numerical { term, .. }) => assert!(term.contains("squared-error")),
            other => panic!("expected numerical failure, got {other:?}"),
        }
    }
}
