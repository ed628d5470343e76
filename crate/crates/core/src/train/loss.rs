//! Clipped surrogate objectives and their gradients with respect to logits.

use ndarray::{Array2, ArrayView2};

use crate::nn::{log_softmax, DenseNet, ForwardCache};

use super::TrainError;

/// `min(rho * A, clip(rho, 1 - eps, 1 + eps) * A)`.
pub fn clipped_term(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
    (ratio * advantage).min(clipped * advantage)
}

/// Derivative of [`clipped_term`] with respect to the new log-probability.
fn clipped_term_grad(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
    if ratio * advantage <= clipped * advantage {
        ratio * advantage
    } else {
        0.0
    }
}

pub fn baseline_penalty_reward(reward: f64, cost: f64, zeta: f64) -> f64 {
    reward - zeta * cost
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurrogateParts {
    /// Mean clipped surrogate over agents and timesteps.
    pub surrogate: f64,
    /// `0.5 * mean((V - target)^2)`.
    pub value_loss: f64,
    /// `-surrogate + critic_coef * value_loss`, the quantity minimized.
    pub loss: f64,
}

fn value_loss(values: &[f64], targets: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    0.5 * values.iter().zip(targets).map(|(v, t)| (v - t) * (v - t)).sum::<f64>() / values.len() as f64
}

/// Log-probabilities of `actions` under `actor` plus importance ratios
/// against `old_log_probs`. Rows are agent-major within a timestep.
pub(crate) struct PolicyEval {
    pub logits: Array2<f64>,
    pub cache: ForwardCache,
    pub ratios: Vec<f64>,
}

pub(crate) fn evaluate_policy(
    actor: &DenseNet,
    inputs: ArrayView2<'_, f64>,
    actions: &[usize],
    old_log_probs: &[f64],
    agents: usize,
) -> Result<PolicyEval, TrainError> {
    let (logits, cache) = actor.forward(inputs)?;
    let mut ratios = Vec::with_capacity(actions.len());
    for (row, (l, (&a, &old))) in logits.outer_iter().zip(actions.iter().zip(old_log_probs)).enumerate() {
        let logp = log_softmax(l.as_slice().expect("contiguous logits"));
        let ratio = (logp[a] - old).exp();
        if !ratio.is_finite() {
            return Err(TrainError::NonFiniteRatio {
                timestep: row / agents.max(1),
                agent: row % agents.max(1),
            });
        }
        ratios.push(ratio);
    }
    Ok(PolicyEval { logits, cache, ratios })
}

/// Clipped surrogate loss of one objective (reward or cost) plus the
/// critic's regression term.
#[allow(clippy::too_many_arguments)]
pub fn surrogate_loss(
    actor: &DenseNet,
    inputs: ArrayView2<'_, f64>,
    actions: &[usize],
    old_log_probs: &[f64],
    advantages: &[f64],
    eps: f64,
    critic_coef: f64,
    values: &[f64],
    targets: &[f64],
    agents: usize,
) -> Result<SurrogateParts, TrainError> {
    let eval = evaluate_policy(actor, inputs, actions, old_log_probs, agents)?;
    let n = eval.ratios.len().max(1) as f64;
    let surrogate = eval
        .ratios
        .iter()
        .zip(advantages)
        .map(|(&r, &a)| clipped_term(r, a, eps))
        .sum::<f64>()
        / n;
    let value_loss = value_loss(values, targets);
    Ok(SurrogateParts {
        surrogate,
        value_loss,
        loss: -surrogate + critic_coef * value_loss,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LagrangianLoss {
    pub reward: SurrogateParts,
    pub cost: SurrogateParts,
    /// `reward.loss - lambda * cost.loss`.
    pub total: f64,
}

/// The combined objective `L_r - lambda * L_c`.
#[allow(clippy::too_many_arguments)]
pub fn lagrangian_loss(
    actor: &DenseNet,
    inputs: ArrayView2<'_, f64>,
    actions: &[usize],
    old_log_probs: &[f64],
    reward: (&[f64], &[f64], &[f64]),
    cost: (&[f64], &[f64], &[f64]),
    lambda: f64,
    eps: f64,
    critic_coef: f64,
    agents: usize,
) -> Result<LagrangianLoss, TrainError> {
    let r = surrogate_loss(actor, inputs, actions, old_log_probs, reward.0, eps, critic_coef, reward.1, reward.2, agents)?;
    let c = surrogate_loss(actor, inputs, actions, old_log_probs, cost.0, eps, critic_coef, cost.1, cost.2, agents)?;
    Ok(LagrangianLoss {
        reward: r,
        cost: c,
        total: r.loss - lambda * c.loss,
    })
}

/// Gradient of `-mean S_r + lambda * mean S_c - entropy_coef * mean H`
/// with respect to the actor parameters, and that loss value.
#[allow(clippy::too_many_arguments)]
pub(crate) fn policy_gradient(
    actor: &DenseNet,
    inputs: ArrayView2<'_, f64>,
    actions: &[usize],
    old_log_probs: &[f64],
    reward_adv: &[f64],
    cost: Option<(&[f64], f64)>,
    eps: f64,
    entropy_coef: f64,
    agents: usize,
) -> Result<(Vec<f64>, f64), TrainError> {
    let eval = evaluate_policy(actor, inputs, actions, old_log_probs, agents)?;
    let rows = eval.ratios.len();
    let n = rows.max(1) as f64;
    let width = eval.logits.ncols();
    let mut grad_logits = Array2::<f64>::zeros((rows, width));
    let mut loss = 0.0;
    for row in 0..rows {
        let ratio = eval.ratios[row];
        let ar = reward_adv[row];
        let mut coef = -clipped_term_grad(ratio, ar, eps);
        loss -= clipped_term(ratio, ar, eps);
        if let Some((cost_adv, lambda)) = cost {
            if lambda != 0.0 {
                let ac = cost_adv[row];
                coef += lambda * clipped_term_grad(ratio, ac, eps);
                loss += lambda * clipped_term(ratio, ac, eps);
            }
        }
        let logp = log_softmax(eval.logits.row(row).as_slice().expect("contiguous logits"));
        let mut g = grad_logits.row_mut(row);
        // d logp[a] / d logits = onehot(a) - p
        for j in 0..width {
            let p = logp[j].exp();
            let onehot = if j == actions[row] { 1.0 } else { 0.0 };
            g[j] = coef * (onehot - p) / n;
        }
        if entropy_coef != 0.0 {
            let entropy: f64 = -logp.iter().map(|lp| lp.exp() * lp).sum::<f64>();
            loss -= entropy_coef * entropy;
            for j in 0..width {
                let p = logp[j].exp();
                // dH/dz_j = -p_j (log p_j + H)
                g[j] += entropy_coef * p * (logp[j] + entropy) / n;
            }
        }
    }
    let grads = actor.backward(&eval.cache, grad_logits.view())?;
    Ok((grads, loss / n))
}
