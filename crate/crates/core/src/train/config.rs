//! Training hyperparameters.

use serde::{Deserialize, Serialize};

use crate::nn::EpsilonSchedule;

use super::TrainError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// MAPPO with dual critics, a cost estimator and a Lagrange multiplier.
    MappoLce,
    /// Shared-actor MAPPO on the penalty reward `r - zeta * c`.
    Mappo,
    /// Independent per-agent PPO on the penalty reward.
    Ippo,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::MappoLce => "mappo-lce",
            Algorithm::Mappo => "mappo",
            Algorithm::Ippo => "ippo",
        }
    }

    /// Learning rate used when none is configured.
    pub fn default_lr(self) -> f64 {
        match self {
            Algorithm::Mappo => 5e-4,
            Algorithm::MappoLce | Algorithm::Ippo => 5e-5,
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mappo-lce" | "mappo_lce" | "lce" => Ok(Algorithm::MappoLce),
            "mappo" => Ok(Algorithm::Mappo),
            "ippo" => Ok(Algorithm::Ippo),
            other => Err(format!("unknown algorithm `{other}` (expected mappo-lce, mappo or ippo)")),
        }
    }
}

/// How evaluation episodes pick actions. Both switch exploration off.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalPolicy {
    /// Sample the actor's softmax with epsilon at zero.
    #[default]
    Sample,
    /// Take the arg-max phase.
    Greedy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    /// Actor and critic learning rate; the algorithm's default when absent.
    pub lr: Option<f64>,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub hidden_dim: usize,
    pub grad_norm_clip: f64,
    pub critic_coef: f64,
    pub entropy_coef: f64,
    /// Listed with the other PPO settings; not used by any update.
    pub reg_coef: f64,
    pub epochs: usize,
    /// Minibatches per epoch.
    pub minibatches: usize,
    pub eps_clip: f64,
    /// Listed with the other PPO settings; targets are soft-updated every iteration instead.
    pub target_update_interval: u64,
    pub tau: f64,
    pub lambda_init: f64,
    pub lambda_lr: f64,
    /// Optional ceiling for the Lagrange multiplier.
    pub lambda_max: Option<f64>,
    pub cost_estimator_lr: f64,
    pub cost_limit: f64,
    /// Penalty weight of the baselines' reward `r - zeta * c`.
    pub penalty_zeta: f64,
    pub batch_size: usize,
    pub buffer_size: usize,
    pub epsilon: EpsilonSchedule,
    pub total_env_steps: u64,
    /// Training iterations between evaluation episodes.
    pub eval_interval: u64,
    pub eval_policy: EvalPolicy,
    /// Multiplier applied to environment rewards before learning.
    pub reward_scale: f64,
    /// Multiplier applied to vehicle counts in network inputs.
    pub obs_scale: f64,
    pub normalize_advantages: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            algorithm: Algorithm::MappoLce,
            lr: None,
            gamma: 0.985,
            gae_lambda: 0.95,
            hidden_dim: 128,
            grad_norm_clip: 10.0,
            critic_coef: 0.5,
            entropy_coef: 0.0,
            reg_coef: 0.01,
            epochs: 2,
            minibatches: 1,
            eps_clip: 0.15,
            target_update_interval: 200,
            tau: 0.01,
            lambda_init: 0.01,
            lambda_lr: 1e-4,
            lambda_max: None,
            cost_estimator_lr: 1e-4,
            cost_limit: 0.0,
            penalty_zeta: 0.2,
            batch_size: 8,
            buffer_size: 8,
            epsilon: EpsilonSchedule::default(),
            total_env_steps: 500_000,
            eval_interval: 10,
            eval_policy: EvalPolicy::Sample,
            reward_scale: 0.01,
            obs_scale: 0.1,
            normalize_advantages: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        TrainConfig {
            algorithm,
            ..TrainConfig::default()
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr.unwrap_or_else(|| self.algorithm.default_lr())
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: &str| Err(TrainError::Config(msg.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.eps_clip > 0.0) {
            return bad("eps_clip must be positive");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !(self.learning_rate() > 0.0) || !(self.cost_estimator_lr > 0.0) || !(self.lambda_lr >= 0.0) {
            return bad("learning rates must be positive");
        }
        if self.lambda_init < 0.0 {
            return bad("lambda_init must be non-negative");
        }
        if self.penalty_zeta < 0.0 {
            return bad("penalty_zeta must be non-negative");
        }
        if self.hidden_dim == 0 || self.epochs == 0 || self.minibatches == 0 {
            return bad("hidden_dim, epochs and minibatches must be at least 1");
        }
        if self.batch_size == 0 || self.buffer_size == 0 || self.batch_size > self.buffer_size {
            return bad("batch_size must be in 1..=buffer_size");
        }
        if self.eval_interval == 0 {
            return bad("eval_interval must be at least 1");
        }
        if !(self.grad_norm_clip > 0.0) {
            return bad("grad_norm_clip must be positive");
        }
        if !(self.reward_scale > 0.0) || !(self.obs_scale > 0.0) {
            return bad("reward_scale and obs_scale must be positive");
        }
        if !(0.0..=1.0).contains(&self.epsilon.start) || !(0.0..=1.0).contains(&self.epsilon.finish) {
            return bad("epsilon schedule must stay within [0, 1]");
        }
        Ok(())
    }
}
