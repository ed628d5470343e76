//! Generalized advantage estimation.

use super::NnError;

#[derive(Clone, Debug, PartialEq)]
pub struct AdvantageBatch {
    pub advantages: Vec<f64>,
    /// `advantages + values`, the value regression targets.
    pub returns: Vec<f64>,
}

/// Backward recursion `A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}`
/// with `delta_t = r_t + gamma * (1 - done_t) * V(s_{t+1}) - V(s_t)`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<AdvantageBatch, NnError> {
    let n = rewards.len();
    for (what, len) in [("values", values.len()), ("next values", next_values.len()), ("dones", dones.len())] {
        if len != n {
            return Err(NnError::Dimension { what, expected: n, got: len });
        }
    }
    let mut advantages = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * live * next_values[t] - values[t];
        running = delta + gamma * lambda * live * running;
        advantages[t] = running;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok(AdvantageBatch { advantages, returns })
}
