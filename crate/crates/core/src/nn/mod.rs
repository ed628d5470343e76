//! Dense networks, optimizers and policy-gradient building blocks.

pub mod adam;
pub mod checkpoint;
pub mod dense;
pub mod gae;
pub mod policy;

use thiserror::Error;

pub use adam::{adam_step, global_norm, AdamState};
pub use checkpoint::Checkpoint;
pub use dense::{param_count, soft_update, DenseNet, ForwardCache};
pub use gae::{gae, AdvantageBatch};
pub use policy::{argmax, log_softmax, sample_action, softmax, EpsilonSchedule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("{what}: expected {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("forward cache does not match the current parameters")]
    StaleCache,
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("checkpoint format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}
