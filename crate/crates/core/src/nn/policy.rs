//! Categorical policy heads over signal phases and the exploration schedule.

use rand::Rng;
use serde::{Deserialize, Serialize};

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// With probability `epsilon` picks uniformly, otherwise samples the softmax.
/// The returned log-probability is always the softmax's, not the mixture's.
pub fn sample_action<R: Rng + ?Sized>(logits: &[f64], epsilon: f64, rng: &mut R) -> (usize, f64) {
    let logp = log_softmax(logits);
    let action = if rng.random::<f64>() < epsilon {
        rng.random_range(0..logits.len())
    } else {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = logits.len() - 1;
        for (i, lp) in logp.iter().enumerate() {
            acc += lp.exp();
            if u < acc {
                chosen = i;
                break;
            }
        }
        chosen
    };
    (action, logp[action])
}

/// Linear anneal from `start` to `finish` over `anneal_steps` env steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub finish: f64,
    pub anneal_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            start: 1.0,
            finish: 0.05,
            anneal_steps: 500_000,
        }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, env_step: u64) -> f64 {
        if self.anneal_steps == 0 || env_step >= self.anneal_steps {
            return self.finish;
        }
        let frac = env_step as f64 / self.anneal_steps as f64;
        self.start + (self.finish - self.start) * frac
    }
}
