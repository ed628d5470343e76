//! Runs one episode on a 2x2 grid under three hand-written controllers and
//! prints throughput, delay, reward and constraint costs.
//!
//! cargo run --release --example simulate

use std::sync::Arc;

use atsc::constraints::ConstraintConfig;
use atsc::sim::{gen_grid, standard_phases, Observation, RoadNetwork, SimConfig, Simulator, PHASES};
use atsc::train::{collect_rollout, ActionMode, JointPolicy, SignalEnv, TrainError, UniformPolicy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Picks the phase whose green movements hold the most vehicles.
struct LongestQueue;

impl JointPolicy for LongestQueue {
    fn logits(&self, observations: &[Observation]) -> Result<Vec<Vec<f64>>, TrainError> {
        let phases = standard_phases();
        Ok(observations
            .iter()
            .map(|o| phases.iter().map(|p| p.green.iter().map(|m| o.lane_counts()[m.index()]).sum()).collect())
            .collect())
    }
}

/// Cycles through the eight phases, one decision step each.
struct Cycle;

impl JointPolicy for Cycle {
    fn logits(&self, observations: &[Observation]) -> Result<Vec<Vec<f64>>, TrainError> {
        Ok(observations
            .iter()
            .map(|o| {
                let next = (o.phase() + 1) % PHASES;
                (0..PHASES).map(|p| if p == next { 1.0 } else { 0.0 }).collect()
            })
            .collect())
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (doc, flow) = gen_grid(2, 2, 0.2, 0);
    let network = Arc::new(RoadNetwork::from_document(doc)?);
    let sim = Simulator::new(network, Arc::new(flow), SimConfig::default(), 0)?;
    let mut env = SignalEnv::new(sim, ConstraintConfig::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    let runs: [(&str, &dyn JointPolicy, ActionMode); 3] = [
        ("uniform random", &UniformPolicy, ActionMode::Fixed(1.0)),
        ("fixed cycle", &Cycle, ActionMode::Greedy),
        ("longest queue", &LongestQueue, ActionMode::Greedy),
    ];
    println!("{:<16} {:>10} {:>10} {:>12} {:>9} {:>9} {:>9}", "controller", "throughput", "delay s", "reward", "greentime", "phaseskip", "greenskip");
    for (name, policy, mode) in runs {
        let episode = collect_rollout(policy, &mut env, 0, mode, &mut rng)?;
        let costs = episode.mean_costs();
        println!(
            "{name:<16} {:>10} {:>10.1} {:>12.0} {:>9.3} {:>9.3} {:>9.3}",
            episode.metrics.throughput,
            episode.metrics.average_delay,
            episode.total_reward(),
            costs.green_time,
            costs.phase_skip,
            costs.green_skip
        );
    }
    Ok(())
}
