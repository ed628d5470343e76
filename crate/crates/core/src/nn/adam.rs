//! Adam with global-norm gradient clipping.

use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(num_params: usize, lr: f64) -> Self {
        AdamState {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

pub fn global_norm(grads: &[f64]) -> f64 {
    grads.iter().map(|g| g * g).sum::<f64>().sqrt()
}

/// Clips `grads` to `max_grad_norm` (if any) and applies one bias-corrected
/// Adam update to `params`. Returns the gradient norm before clipping.
/// Non-finite gradients leave both `params` and `state` untouched.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    max_grad_norm: Option<f64>,
) -> Result<f64, NnError> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(NnError::Dimension {
            what: "adam step",
            expected: params.len(),
            got: grads.len(),
        });
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(NnError::NonFinite(format!("gradient entry {i}")));
    }
    let norm = global_norm(grads);
    let scale = match max_grad_norm {
        Some(max) if norm > max => max / norm,
        _ => 1.0,
    };
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i] * scale;
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = vec![0.5, -1.0];
        let mut s = AdamState::new(2, 1e-3);
        adam_step(&mut p, &[0.0, 0.0], &mut s, Some(10.0)).unwrap();
        assert_eq!(p, vec![0.5, -1.0]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = vec![0.0];
        let mut s = AdamState::new(1, 1e-3);
        adam_step(&mut p, &[1.0], &mut s, None).unwrap();
        // m_hat = 1, v_hat = 1
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn clipping_halves_a_norm_20_gradient() {
        let g = [12.0, 16.0];
        let mut clipped = AdamState::new(2, 1e-3);
        let mut p = vec![0.0; 2];
        assert_eq!(adam_step(&mut p, &g, &mut clipped, Some(10.0)).unwrap(), 20.0);
        assert!((clipped.m[0] - 0.1 * 6.0).abs() < 1e-12);
        assert!((clipped.m[1] - 0.1 * 8.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = vec![1.0, 2.0];
        let mut s = AdamState::new(2, 1e-3);
        assert!(adam_step(&mut p, &[f64::NAN, 0.0], &mut s, None).is_err());
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(s.step, 0);
    }
}
