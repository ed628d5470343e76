//! Vehicle demand: spawn rules along fixed routes.

use serde::{Deserialize, Serialize};

use super::network::RoadNetwork;
use super::SimError;

pub const FLOW_FORMAT_VERSION: u32 = 1;

/// `count` vehicles along `route`, the k-th spawning at `start_time + k * interval` seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowRule {
    pub route: Vec<usize>,
    pub start_time: u64,
    #[serde(default = "one")]
    pub interval: u64,
    #[serde(default = "one")]
    pub count: u64,
}

fn one() -> u64 {
    1
}

impl FlowRule {
    pub fn spawn_times(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.count).map(move |k| self.start_time + k * self.interval)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowDocument {
    pub format_version: u32,
    pub flows: Vec<FlowRule>,
}

impl FlowDocument {
    pub fn new(flows: Vec<FlowRule>) -> Self {
        FlowDocument {
            format_version: FLOW_FORMAT_VERSION,
            flows,
        }
    }

    pub fn total_vehicles(&self) -> u64 {
        self.flows.iter().map(|f| f.count).sum()
    }

    /// Checks every route against `network`.
    pub fn validate(&self, network: &RoadNetwork) -> Result<(), SimError> {
        if self.format_version != FLOW_FORMAT_VERSION {
            return Err(SimError::Format(format!(
                "unsupported flow format_version {} (expected {FLOW_FORMAT_VERSION})",
                self.format_version
            )));
        }
        for (i, rule) in self.flows.iter().enumerate() {
            if rule.route.is_empty() {
                return Err(SimError::Flow(format!("flow rule {i} has an empty route")));
            }
            if rule.count > 1 && rule.interval == 0 {
                return Err(SimError::Flow(format!(
                    "flow rule {i} spawns {} vehicles with interval 0",
                    rule.count
                )));
            }
            for &r in &rule.route {
                if r >= network.roads.len() {
                    return Err(SimError::Flow(format!("flow rule {i} references unknown road {r}")));
                }
            }
            for w in rule.route.windows(2) {
                if network.turn_between(w[0], w[1]).is_none() {
                    return Err(SimError::Flow(format!(
                        "flow rule {i}: road {} does not lead onto road {} (disconnected or U-turn)",
                        w[0], w[1]
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn load_flow(document: &str) -> Result<FlowDocument, SimError> {
    serde_json::from_str(document).map_err(|e| SimError::Parse(format!("flow document: {e}")))
}
