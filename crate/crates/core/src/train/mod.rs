//! MAPPO with a learned cost estimator and Lagrange multiplier, plus the
//! penalty-reward MAPPO and IPPO baselines.

pub mod buffer;
pub mod config;
pub mod features;
pub mod learner;
pub mod loss;
pub mod rollout;
pub mod trainer;

use thiserror::Error;

use crate::constraints::ConstraintError;
use crate::nn::NnError;
use crate::sim::SimError;

pub use buffer::ReplayBuffer;
pub use config::{Algorithm, EvalPolicy, TrainConfig};
pub use features::Features;
pub use learner::{
    actor_update, cost_estimator_update, critic_td_update, lambda_update, AgentLearner, Learner, LearnerState,
    TrainingBatch,
};
pub use loss::{baseline_penalty_reward, clipped_term, lagrangian_loss, surrogate_loss, LagrangianLoss, SurrogateParts};
pub use rollout::{
    collect_rollout, ActionMode, EnvStep, Episode, IndependentActors, JointPolicy, SharedActor, SignalEnv, Transition,
    UniformPolicy,
};
pub use trainer::{ippo_train, train, MetricsRow, TrainReport, Trainer, METRICS_COLUMNS};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("non-finite importance ratio at timestep {timestep}, agent {agent}")]
    NonFiniteRatio { timestep: usize, agent: usize },
    #[error("{0}")]
    Io(String),
}
