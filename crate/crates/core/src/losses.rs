//! Losses that couple several networks (actor through critic, critic with
//! policy samples), each with its analytic parameter gradient.

use ndarray::{concatenate, s, Array2, Axis};

use crate::error::{ensure_finite, Error, Result};
use crate::rl::{concat_cols, Actor, PolicyKind};
use crate::tensor::{output_loss, GradientBundle, LossSpec, Mlp, LOG_STD_MAX, LOG_STD_MIN};

/// Supervised term added to an actor objective on a subset of batch rows.
#[derive(Clone, Copy, Debug)]
pub struct BcTerm<'a> {
    /// Batch rows the term applies to.
    pub rows: &'a [usize],
    /// Target actions, one per entry of `rows`.
    pub actions: &'a Array2<f64>,
    /// Weight numerator; the applied weight is `alpha_bc / mean |Q|`.
    pub alpha_bc: f64,
}

/// Inputs of the actor objective `E[alpha log pi(a|s) - min_k Q_k(s, a)]`.
#[derive(Clone, Copy, Debug)]
pub struct ActorBatch<'a> {
    /// Actor input rows: states, or `[state, base action]` for residual actors.
    pub inputs: &'a Array2<f64>,
    /// State rows fed to the critics.
    pub states: &'a Array2<f64>,
    /// Residual base actions; the evaluated action is `clip(base + a)`.
    pub base: Option<&'a Array2<f64>>,
    /// Standard-normal reparameterization noise (ignored for deterministic actors).
    pub noise: &'a Array2<f64>,
    pub alpha: f64,
    pub bc: Option<BcTerm<'a>>,
}

#[derive(Clone, Debug)]
pub struct ActorLoss {
    pub loss: f64,
    pub rl_loss: f64,
    pub bc_loss: f64,
    pub bc_weight: f64,
    pub mean_abs_q: f64,
    pub grads: GradientBundle,
}

fn clip_mask(v: f64) -> (f64, f64) {
    if v > 1.0 {
        (1.0, 0.0)
    } else if v < -1.0 {
        (-1.0, 0.0)
    } else {
        (v, 1.0)
    }
}

/// Actor objective with the minimum over `critics` (all gradients flow
/// through the minimizing critic of each row).
pub fn actor_loss(actor: &Actor, critics: &[&Mlp], batch: &ActorBatch<'_>) -> Result<ActorLoss> {
    let rows = batch.inputs.nrows();
    if rows == 0 || critics.is_empty() {
        return Err(Error::config("actor loss needs a non-empty batch and at least one critic"));
    }
    let m = actor.action_dim();
    let inv = 1.0 / rows as f64;
    let cache = actor.net.forward_batch(batch.inputs)?;
    let raw = &cache.output;

    let mut a_pre = Array2::zeros((rows, m));
    let mut sigma_eps = Array2::zeros((rows, m));
    let mut log_probs = vec![0.0; rows];
    let sample = actor.sample_from_raw(raw, batch.noise);
    for i in 0..rows {
        for j in 0..m {
            if actor.kind == PolicyKind::Stochastic {
                sigma_eps[[i, j]] = raw[[i, m + j]].clamp(LOG_STD_MIN, LOG_STD_MAX).exp() * batch.noise[[i, j]];
            }
            a_pre[[i, j]] = sample.actions[[i, j]];
        }
        log_probs[i] = sample.log_probs[i];
    }
    let mut action = a_pre.clone();
    let mut mask = Array2::from_elem((rows, m), 1.0);
    if let Some(base) = batch.base {
        for i in 0..rows {
            for j in 0..m {
                let (v, k) = clip_mask(base[[i, j]] + a_pre[[i, j]]);
                action[[i, j]] = v;
                mask[[i, j]] = k;
            }
        }
    }

    let x = concat_cols(batch.states.view(), action.view());
    let caches = critics.iter().map(|c| c.forward_batch(&x)).collect::<Result<Vec<_>>>()?;
    let mut q_min = vec![f64::INFINITY; rows];
    let mut arg = vec![0usize; rows];
    for (k, c) in caches.iter().enumerate() {
        for i in 0..rows {
            if c.output[[i, 0]] < q_min[i] {
                q_min[i] = c.output[[i, 0]];
                arg[i] = k;
            }
        }
    }
    let n = batch.states.ncols();
    let mut d_action = Array2::zeros((rows, m));
    for (k, c) in caches.iter().enumerate() {
        let mut d_q = Array2::zeros((rows, 1));
        let mut any = false;
        for i in 0..rows {
            if arg[i] == k {
                d_q[[i, 0]] = -inv;
                any = true;
            }
        }
        if any {
            let dx = critics[k].input_grad(c, &d_q);
            d_action += &dx.slice(s![.., n..]);
        }
    }
    let stochastic = actor.kind == PolicyKind::Stochastic;
    let mut rl_loss = -q_min.iter().sum::<f64>() * inv;
    if stochastic {
        rl_loss += batch.alpha * log_probs.iter().sum::<f64>() * inv;
    }

    let mut d_raw = Array2::zeros(raw.raw_dim());
    for i in 0..rows {
        for j in 0..m {
            let t = a_pre[[i, j]];
            let mut du = d_action[[i, j]] * mask[[i, j]] * (1.0 - t * t);
            if stochastic {
                du += batch.alpha * 2.0 * t * inv;
                d_raw[[i, j]] = du;
                let ls_raw = raw[[i, m + j]];
                if (LOG_STD_MIN..=LOG_STD_MAX).contains(&ls_raw) {
                    d_raw[[i, m + j]] = du * sigma_eps[[i, j]] - batch.alpha * inv;
                }
            } else {
                d_raw[[i, j]] = du;
            }
        }
    }

    let mean_abs_q = q_min.iter().map(|q| q.abs()).sum::<f64>() * inv;
    let (mut bc_loss, mut bc_weight) = (0.0, 0.0);
    if let Some(bc) = batch.bc {
        if bc.alpha_bc != 0.0 && !bc.rows.is_empty() {
            bc_weight = bc.alpha_bc / mean_abs_q.max(1e-6);
            let sub_raw = raw.select(Axis(0), bc.rows);
            let sub_base = batch.base.map(|b| b.select(Axis(0), bc.rows));
            let (l, d_sub) = bc_output_loss(actor, &sub_raw, sub_base.as_ref(), bc.actions)?;
            bc_loss = l;
            for (r, &i) in bc.rows.iter().enumerate() {
                let mut row = d_raw.row_mut(i);
                row.scaled_add(bc_weight, &d_sub.row(r));
            }
        }
    }
    let loss = rl_loss + bc_weight * bc_loss;
    ensure_finite("actor loss", loss)?;
    let (grads, _) = actor.net.backward(&cache, &d_raw, false);
    Ok(ActorLoss { loss, rl_loss, bc_loss, bc_weight, mean_abs_q, grads })
}

/// Behavior-cloning loss of raw actor outputs: gaussian NLL for stochastic
/// actors, squared error of the (mean) executed action otherwise or when a
/// residual base is present.
fn bc_output_loss(actor: &Actor, raw: &Array2<f64>, base: Option<&Array2<f64>>, actions: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    let m = actor.action_dim();
    if actions.dim() != (raw.nrows(), m) {
        return Err(Error::config(format!("bc actions {:?} vs {} rows of width {m}", actions.dim(), raw.nrows())));
    }
    match (base, actor.kind) {
        (None, PolicyKind::Stochastic) => output_loss(&actor.net, raw, LossSpec::GaussianNll { actions }),
        (None, PolicyKind::Deterministic) => output_loss(&actor.net, raw, LossSpec::TanhMse { actions }),
        (Some(base), _) => {
            let inv = 1.0 / raw.nrows() as f64;
            let mut grad = Array2::zeros(raw.raw_dim());
            let mut loss = 0.0;
            for i in 0..raw.nrows() {
                for j in 0..m {
                    let t = raw[[i, j]].tanh();
                    let (a, k) = clip_mask(base[[i, j]] + t);
                    let d = a - actions[[i, j]];
                    loss += d * d;
                    grad[[i, j]] = 2.0 * d * k * (1.0 - t * t) * inv;
                }
            }
            Ok((loss * inv, grad))
        }
    }
}

/// Behavior cloning on its own (used for pretraining and offline BC actors).
pub fn bc_loss(actor: &Actor, inputs: &Array2<f64>, base: Option<&Array2<f64>>, actions: &Array2<f64>) -> Result<(f64, GradientBundle)> {
    let cache = actor.net.forward_batch(inputs)?;
    let (loss, d_raw) = bc_output_loss(actor, &cache.output, base, actions)?;
    ensure_finite("behavior cloning loss", loss)?;
    let (grads, _) = actor.net.backward(&cache, &d_raw, false);
    Ok((loss, grads))
}

/// Squared error of a scalar critic against per-row targets.
pub fn critic_regression(critic: &Mlp, states: &Array2<f64>, actions: &Array2<f64>, targets: &[f64]) -> Result<(f64, GradientBundle)> {
    if targets.len() != states.nrows() {
        return Err(Error::config(format!("{} targets for {} rows", targets.len(), states.nrows())));
    }
    let x = concat_cols(states.view(), actions.view());
    let t = Array2::from_shape_vec((targets.len(), 1), targets.to_vec()).expect("column shape");
    let cache = critic.forward_batch(&x)?;
    let (loss, d_out) = output_loss(critic, &cache.output, LossSpec::SquaredError { targets: &t })?;
    ensure_finite("critic regression loss", loss)?;
    let (grads, _) = critic.backward(&cache, &d_out, false);
    Ok((loss, grads))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PushDown {
    /// Expected Q under the policy.
    Rho,
    /// Log-sum-exp over uniform and policy samples with importance correction.
    H,
    /// Expected `max(Q, G)` under the policy, `G` the trajectory return.
    CalQl,
}

/// One conservative critic minibatch.
#[derive(Clone, Copy, Debug)]
pub struct CqlBatch<'a> {
    pub states: &'a Array2<f64>,
    pub actions: &'a Array2<f64>,
    /// Bellman targets for the dataset pairs.
    pub targets: &'a [f64],
    /// K policy action draws at `states`.
    pub policy_actions: &'a [Array2<f64>],
    /// Log-densities of the policy draws.
    pub policy_log_probs: &'a [Vec<f64>],
    /// K uniform action draws on `[-1, 1]^m` (used by [`PushDown::H`]).
    pub uniform_actions: &'a [Array2<f64>],
    /// Trajectory returns from each row onward (used by [`PushDown::CalQl`]).
    pub returns: Option<&'a [f64]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CqlTerms {
    pub bellman: f64,
    /// Push-down term minus mean dataset Q.
    pub regularizer: f64,
    pub total: f64,
}

fn logsumexp(v: &[f64]) -> (f64, Vec<f64>) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    (max + sum.ln(), exps.into_iter().map(|e| e / sum).collect())
}

/// Conservative critic objective: Bellman regression plus
/// `weight * (push-down - E_data[Q])`.
pub fn cql_critic_loss(critic: &Mlp, batch: &CqlBatch<'_>, variant: PushDown, weight: f64) -> Result<(CqlTerms, GradientBundle)> {
    let b = batch.states.nrows();
    let k = batch.policy_actions.len();
    if b == 0 || batch.targets.len() != b || batch.actions.nrows() != b {
        return Err(Error::config("conservative loss: inconsistent batch"));
    }
    if k == 0 || batch.policy_log_probs.len() != k {
        return Err(Error::config("conservative loss: need matching policy samples and log-densities"));
    }
    let uniform: &[Array2<f64>] = if variant == PushDown::H { batch.uniform_actions } else { &[] };
    if variant == PushDown::H && uniform.len() != k {
        return Err(Error::config("conservative loss: H variant needs as many uniform draws as policy draws"));
    }
    let returns = match (variant, batch.returns) {
        (PushDown::CalQl, None) => return Err(Error::config("calibrated push-down needs trajectory returns")),
        (PushDown::CalQl, Some(r)) if r.len() != b => return Err(Error::config("one return per row required")),
        (_, r) => r,
    };
    let m = batch.actions.ncols();
    let mut action_blocks = vec![batch.actions.view()];
    action_blocks.extend(batch.policy_actions.iter().map(|a| a.view()));
    action_blocks.extend(uniform.iter().map(|a| a.view()));
    let blocks = action_blocks.len();
    let all_actions = concatenate(Axis(0), &action_blocks).map_err(|e| Error::config(e.to_string()))?;
    let state_blocks = vec![batch.states.view(); blocks];
    let all_states = concatenate(Axis(0), &state_blocks).expect("equal widths");
    if all_actions.ncols() != m || all_actions.nrows() != all_states.nrows() {
        return Err(Error::config("conservative loss: action blocks disagree in shape"));
    }
    let x = concat_cols(all_states.view(), all_actions.view());
    let cache = critic.forward_batch(&x)?;
    let q = cache.output.column(0);
    let inv_b = 1.0 / b as f64;
    let mut d_q = Array2::zeros((x.nrows(), 1));

    let mut bellman = 0.0;
    let mut data_q = 0.0;
    for i in 0..b {
        let d = q[i] - batch.targets[i];
        bellman += d * d * inv_b;
        data_q += q[i] * inv_b;
        d_q[[i, 0]] = 2.0 * d * inv_b - weight * inv_b;
    }
    let inv_bk = inv_b / k as f64;
    let mut push = 0.0;
    match variant {
        PushDown::Rho => {
            for kk in 0..k {
                for i in 0..b {
                    let r = (1 + kk) * b + i;
                    push += q[r] * inv_bk;
                    d_q[[r, 0]] = weight * inv_bk;
                }
            }
        }
        PushDown::CalQl => {
            let g = returns.expect("checked above");
            for kk in 0..k {
                for i in 0..b {
                    let r = (1 + kk) * b + i;
                    if q[r] > g[i] {
                        push += q[r] * inv_bk;
                        d_q[[r, 0]] = weight * inv_bk;
                    } else {
                        push += g[i] * inv_bk;
                    }
                }
            }
        }
        PushDown::H => {
            let log_uniform = -(m as f64) * std::f64::consts::LN_2;
            let ln_2k = ((2 * k) as f64).ln();
            for i in 0..b {
                let mut v = Vec::with_capacity(2 * k);
                let mut r_idx = Vec::with_capacity(2 * k);
                for kk in 0..k {
                    let r = (1 + k + kk) * b + i;
                    v.push(q[r] - log_uniform);
                    r_idx.push(r);
                }
                for kk in 0..k {
                    let r = (1 + kk) * b + i;
                    v.push(q[r] - batch.policy_log_probs[kk][i]);
                    r_idx.push(r);
                }
                let (lse, soft) = logsumexp(&v);
                push += (lse - ln_2k) * inv_b;
                for (r, w) in r_idx.into_iter().zip(soft) {
                    d_q[[r, 0]] = weight * w * inv_b;
                }
            }
        }
    }
    let regularizer = push - data_q;
    let total = bellman + weight * regularizer;
    ensure_finite("conservative critic loss", total)?;
    let (grads, _) = critic.backward(&cache, &d_q, false);
    Ok((CqlTerms { bellman, regularizer, total }, grads))
}

/// Calibrated push-down value `mean_{k,i} max(Q_k[i], G[i])` for policy
/// Q-values `q_policy[k][i]`.
pub fn calql_regularizer(q_policy: &[Vec<f64>], returns: Option<&[f64]>) -> Result<f64> {
    let g = returns.ok_or_else(|| Error::config("calibrated push-down needs trajectory returns"))?;
    let mut total = 0.0;
    let mut count = 0usize;
    for qk in q_policy {
        if qk.len() != g.len() {
            return Err(Error::config(format!("{} Q-values for {} returns", qk.len(), g.len())));
        }
        for (q, r) in qk.iter().zip(g) {
            total += q.max(*r);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::config("calibrated push-down over an empty batch"));
    }
    Ok(total / count as f64)
}
