//! Trains MAPPO-LCE, penalty MAPPO and IPPO with the same seed and
//! environment, then prints the comparison table of the final evaluations.
//!
//! cargo run --release --example compare_baselines -- 20000

use atsc::harness::{compare, run, RunConfig};
use atsc::train::Algorithm;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps: u64 = std::env::args().nth(1).map_or(Ok(20_000), |s| s.parse())?;
    let root = std::env::temp_dir().join("atsc-compare");
    let mut dirs = Vec::new();
    for algorithm in [Algorithm::MappoLce, Algorithm::Mappo, Algorithm::Ippo] {
        let mut config = RunConfig::default();
        config.train.algorithm = algorithm;
        config.train.total_env_steps = steps;
        config.train.epsilon.anneal_steps = steps / 5;
        config.final_window = 3;
        config.out_dir = Some(root.join(algorithm.name()));
        let outcome = run(&config)?;
        println!("trained {} into {}", algorithm.name(), outcome.out_dir.display());
        dirs.push(outcome.out_dir);
    }
    print!("{}", compare(&dirs)?);
    Ok(())
}
