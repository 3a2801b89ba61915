#![allow(dead_code)]

use demorl_core::tensor::{GradientBundle, Head, Mlp};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rows: usize, cols: usize, lo: f64, hi: f64, r: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || r.random_range(lo..hi))
}

pub fn net(dims: &[usize], head: Head, seed: u64) -> Mlp {
    Mlp::new(dims, head, &mut rng(seed)).unwrap()
}

/// Central finite-difference gradient of `f` with respect to every
/// parameter of `params`.
pub fn fd_grad(params: &Mlp, f: &dyn Fn(&Mlp) -> f64) -> Vec<f64> {
    let eps = 1e-6;
    let base = params.params_flat();
    let mut probe = params.clone();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + eps;
        probe.set_params_flat(&p).unwrap();
        let hi = f(&probe);
        p[i] = base[i] - eps;
        probe.set_params_flat(&p).unwrap();
        let lo = f(&probe);
        out.push((hi - lo) / (2.0 * eps));
    }
    out
}

/// `|a - b| / max(|a|, |b|)` in the Euclidean norm.
pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nb: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub fn check(analytic: &GradientBundle, params: &Mlp, f: &dyn Fn(&Mlp) -> f64) -> f64 {
    rel_err(&analytic.flat(), &fd_grad(params, f))
}

/// Two-sided exact binomial test p-value for `k` successes in `n` trials.
pub fn binomial_p_value(k: u64, n: u64, p: f64) -> f64 {
    let mut ln_fact = vec![0.0f64; n as usize + 1];
    for i in 1..=n as usize {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    let ln_pmf = |j: u64| {
        ln_fact[n as usize] - ln_fact[j as usize] - ln_fact[(n - j) as usize] + j as f64 * p.ln() + (n - j) as f64 * (1.0 - p).ln()
    };
    let obs = ln_pmf(k);
    (0..=n).map(ln_pmf).filter(|l| *l <= obs + 1e-9).map(f64::exp).sum::<f64>().min(1.0)
}

/// Fixed point of `V = r + gamma * V[next]` by plain iteration.
pub fn value_iteration(rewards: &[f64], next: &dyn Fn(usize) -> usize, gamma: f64) -> Vec<f64> {
    let mut v = vec![0.0; rewards.len()];
    for _ in 0..10_000 {
        let nv: Vec<f64> = (0..rewards.len()).map(|s| rewards[s] + gamma * v[next(s)]).collect();
        let delta = nv.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = nv;
        if delta < 1e-14 {
            break;
        }
    }
    v
}
