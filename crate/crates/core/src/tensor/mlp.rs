use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};

/// Bounds applied to the log-std half of a tanh-Gaussian head.
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
}

/// How the raw output of the final layer is interpreted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Head {
    /// Critics: raw output.
    Linear,
    /// Deterministic actors: `tanh(raw)`.
    Tanh,
    /// Stochastic actors: `2m` outputs, `m` means followed by `m` log-stds.
    TanhGaussian,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    /// Row-major `out x in`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// Fully connected network with ReLU hidden activations.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Linear>,
    activation: Activation,
    head: Head,
}

/// Per-layer activations saved by [`Mlp::forward_batch`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `acts[k]` is the input fed to layer `k`; `acts[0]` is the batch itself.
    acts: Vec<Array2<f64>>,
    /// Raw (pre-head) output of the final layer.
    pub output: Array2<f64>,
}

/// Gradients shaped like the parameters of one [`Mlp`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBundle {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl GradientBundle {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        GradientBundle {
            weights: mlp.layers.iter().map(|l| Array2::zeros(l.weight.raw_dim())).collect(),
            biases: mlp.layers.iter().map(|l| Array1::zeros(l.bias.raw_dim())).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &GradientBundle, scale: f64) {
        for (w, o) in self.weights.iter_mut().zip(&other.weights) {
            w.scaled_add(scale, o);
        }
        for (b, o) in self.biases.iter_mut().zip(&other.biases) {
            b.scaled_add(scale, o);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Same ordering as [`Mlp::params_flat`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.flat().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn matches(&self, mlp: &Mlp) -> bool {
        self.weights.len() == mlp.layers.len()
            && self
                .weights
                .iter()
                .zip(&self.biases)
                .zip(&mlp.layers)
                .all(|((w, b), l)| w.dim() == l.weight.dim() && b.len() == l.bias.len())
    }
}

impl Mlp {
    /// Builds a network with layer widths `dims` (input first, output last).
    /// Weights and biases are drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], head: Head, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(Error::config(format!("invalid layer dims {dims:?}")));
        }
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                Linear {
                    weight: Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-bound..bound)),
                    bias: Array1::from_shape_fn(fan_out, |_| rng.random_range(-bound..bound)),
                }
            })
            .collect();
        Self::from_layers(layers, Activation::Relu, head)
    }

    pub fn from_layers(layers: Vec<Linear>, activation: Activation, head: Head) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(Error::config(format!("layer {k}: bias length {} != out dim {}", l.bias.len(), l.out_dim())));
            }
            if l.weight.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::config(format!("layer {k}: non-finite parameter")));
            }
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::config(format!(
                    "layer {k} emits {} values but layer {} expects {}",
                    pair[0].out_dim(),
                    k + 1,
                    pair[1].in_dim()
                )));
            }
        }
        let out = layers.last().map(Linear::out_dim).unwrap_or(0);
        if head == Head::TanhGaussian && out % 2 != 0 {
            return Err(Error::config(format!("tanh-gaussian head needs an even output width, got {out}")));
        }
        Ok(Mlp { layers, activation, head })
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Linear] {
        &mut self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.in_dim()).chain(self.layers.iter().map(Linear::out_dim)).collect()
    }

    /// Zeroes the weights and bias of the output layer.
    pub fn zero_final_layer(&mut self) {
        let last = self.layers.last_mut().expect("non-empty");
        last.weight.fill(0.0);
        last.bias.fill(0.0);
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Parameters in layer order, each weight row-major followed by its bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weight.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::config(format!("expected {} parameters, got {}", self.param_count(), flat.len())));
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.weight.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub(crate) fn same_shape(&self, other: &Mlp) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| a.weight.dim() == b.weight.dim())
    }

    fn check_batch(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.in_dim() {
            return Err(Error::config(format!("input width {} does not match network input {}", x.ncols(), self.in_dim())));
        }
        Ok(())
    }

    /// Single-sample forward pass with the head applied. A tanh-Gaussian head
    /// returns `[mean.., log_std..]` with the log-stds clamped.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input).map_err(|e| Error::config(e.to_string()))?;
        let raw = self.forward_raw(x)?;
        Ok(self.apply_head(raw).row(0).to_vec())
    }

    /// Batched forward pass returning the raw final-layer output (no cache).
    pub fn forward_raw(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_batch(&x)?;
        let mut h = self.affine(0, x);
        for k in 1..self.layers.len() {
            h.mapv_inplace(relu);
            h = self.affine(k, h.view());
        }
        Ok(h)
    }

    /// Batched forward pass that keeps every layer input for [`Mlp::backward`].
    pub fn forward_batch(&self, x: &Array2<f64>) -> Result<ForwardCache> {
        self.check_batch(&x.view())?;
        let mut acts = Vec::with_capacity(self.layers.len());
        acts.push(x.clone());
        let mut h = self.affine(0, x.view());
        for k in 1..self.layers.len() {
            h.mapv_inplace(relu);
            let next = self.affine(k, h.view());
            acts.push(h);
            h = next;
        }
        Ok(ForwardCache { acts, output: h })
    }

    pub fn apply_head(&self, mut raw: Array2<f64>) -> Array2<f64> {
        match self.head {
            Head::Linear => raw,
            Head::Tanh => {
                raw.mapv_inplace(f64::tanh);
                raw
            }
            Head::TanhGaussian => {
                let m = raw.ncols() / 2;
                raw.slice_mut(s![.., m..]).mapv_inplace(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
                raw
            }
        }
    }

    fn affine(&self, k: usize, x: ArrayView2<f64>) -> Array2<f64> {
        let l = &self.layers[k];
        let mut z = x.dot(&l.weight.t());
        z += &l.bias;
        z
    }

    /// Backpropagates `d_out` (gradient of the loss with respect to the raw
    /// output) to parameter gradients and, optionally, input gradients.
    pub fn backward(&self, cache: &ForwardCache, d_out: &Array2<f64>, want_input: bool) -> (GradientBundle, Option<Array2<f64>>) {
        let n = self.layers.len();
        let mut weights = vec![Array2::zeros((0, 0)); n];
        let mut biases = vec![Array1::zeros(0); n];
        let mut delta = d_out.clone();
        let mut d_input = None;
        for k in (0..n).rev() {
            let a = &cache.acts[k];
            weights[k] = delta.t().dot(a);
            biases[k] = delta.sum_axis(Axis(0));
            if k > 0 {
                let mut d_a = delta.dot(&self.layers[k].weight);
                d_a.zip_mut_with(a, |d, &x| {
                    if x <= 0.0 {
                        *d = 0.0
                    }
                });
                delta = d_a;
            } else if want_input {
                d_input = Some(delta.dot(&self.layers[0].weight));
            }
        }
        (GradientBundle { weights, biases }, d_input)
    }

    /// Gradient with respect to the input only; skips parameter gradients.
    pub fn input_grad(&self, cache: &ForwardCache, d_out: &Array2<f64>) -> Array2<f64> {
        let mut delta = d_out.clone();
        for k in (0..self.layers.len()).rev() {
            let mut d_a = delta.dot(&self.layers[k].weight);
            if k > 0 {
                d_a.zip_mut_with(&cache.acts[k], |d, &x| {
                    if x <= 0.0 {
                        *d = 0.0
                    }
                });
            }
            delta = d_a;
        }
        delta
    }

    pub(crate) fn check_grads(&self, grads: &GradientBundle) -> Result<()> {
        if grads.matches(self) {
            Ok(())
        } else {
            Err(Error::config("gradient shapes do not match parameters"))
        }
    }
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

/// `target <- (1 - tau) * target + tau * online`, element-wise.
pub fn ema_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::config(format!("tau {tau} outside [0, 1]")));
    }
    if !target.same_shape(online) {
        return Err(Error::config("ema_update: target and online shapes differ"));
    }
    if tau == 0.0 {
        return Ok(());
    }
    for (t, o) in target.layers.iter_mut().zip(&online.layers) {
        t.weight.zip_mut_with(&o.weight, |t, &o| *t = (1.0 - tau) * *t + tau * o);
        t.bias.zip_mut_with(&o.bias, |t, &o| *t = (1.0 - tau) * *t + tau * o);
    }
    Ok(())
}
