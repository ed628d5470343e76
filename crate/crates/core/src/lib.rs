//! Constrained multi-agent reinforcement learning for adaptive traffic signal
//! control.
//!
//! * [`sim`]: queue-based multi-intersection traffic simulator.
//! * [`constraints`]: GreenTime, PhaseSkip and GreenSkip trackers and the
//!   per-step cost signal.
//! * [`nn`]: dense networks, Adam, categorical policy heads and GAE.
//! * [`train`]: MAPPO with a Lagrange cost estimator plus penalty-reward
//!   MAPPO and IPPO baselines.
//! * [`harness`]: run configuration, experiment driver and run comparison.

pub mod sim;
pub mod constraints;
pub mod nn;
pub mod train;
pub mod harness;
