//! Deterministic multi-intersection traffic simulator.

pub mod flow;
pub mod grid;
pub mod network;
pub mod observation;
pub mod simulator;

use thiserror::Error;

pub use flow::{load_flow, FlowDocument, FlowRule};
pub use grid::{gen_grid, gen_grid_with, GridSpec};
pub use network::{
    load_network, standard_phases, Endpoint, LightSet, Movement, NetworkDocument, Phase, RoadNetwork, Side, Turn,
    MOVEMENTS, PHASES,
};
pub use observation::{global_state, Observation, OBS_LEN};
pub use simulator::{
    CompletedTrip, EpisodeMetrics, SignalState, SimConfig, SimState, Simulator, StepInfo, StepOutcome, Vehicle,
    VehicleStatus,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("flow error: {0}")]
    Flow(String),
    #[error("invalid simulator config: {0}")]
    Config(String),
    #[error("invalid action: {0}")]
    Action(String),
}
