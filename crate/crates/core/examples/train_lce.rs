//! Trains MAPPO-LCE on the 2x2 grid under the GreenTime constraint and
//! prints one line per evaluation episode.
//!
//! cargo run --release --example train_lce -- 20000

use atsc::harness::{load_environment, RunConfig};
use atsc::nn::Checkpoint;
use atsc::train::{Algorithm, Trainer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps: u64 = std::env::args().nth(1).map_or(Ok(20_000), |s| s.parse())?;
    let mut config = RunConfig::default();
    config.train.algorithm = Algorithm::MappoLce;
    config.train.total_env_steps = steps;
    config.train.epsilon.anneal_steps = steps / 5;

    let (network, flow) = load_environment(&config)?;
    let mut trainer = Trainer::new(config.train.clone(), network, flow, config.sim.clone(), config.constraint.clone())?;
    println!("{:>7} {:>10} {:>10} {:>8} {:>9} {:>9}", "step", "reward", "throughput", "delay", "greentime", "lambda");
    let report = trainer.run(|row| {
        println!(
            "{:>7} {:>10.0} {:>10.0} {:>8.1} {:>9.4} {:>9.6}",
            row.step, row.test_reward, row.throughput, row.avg_delay, row.cost_greentime, row.lambda
        )
    })?;
    let last = report.updates.last().map(|(_, s)| s);
    if let Some(s) = last {
        println!(
            "{} iterations; last update: actor loss {:.4}, reward TD {:.4}, cost TD {:.6}, estimator {:.6}",
            report.iterations, s.actor_loss, s.reward_td_loss, s.cost_td_loss, s.estimator_loss
        );
    }

    let path = std::env::temp_dir().join("atsc-lce-checkpoint.txt");
    trainer.checkpoint().save(&path)?;
    let restored = Checkpoint::load(&path)?;
    let actor = restored.net("actor").ok_or("checkpoint has no actor")?;
    println!(
        "checkpoint {} restores an actor with {} parameters, lambda {:?}",
        path.display(),
        actor.num_params(),
        restored.scalar("lambda")
    );
    Ok(())
}
