//! Feeds a hand-picked phase sequence to the constraint trackers and prints
//! the counters and costs after every decision step.
//!
//! cargo run --example constraints

use atsc::constraints::{ConstraintConfig, ConstraintMode, ConstraintTracker};
use atsc::sim::standard_phases;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let phases = standard_phases();
    // tight thresholds so the short sequence trips every constraint
    let config = ConstraintConfig {
        max_green_time: 3,
        max_phase_skips: 2,
        max_green_skips: 2,
        mode: ConstraintMode::All,
    };
    let sequence = [0, 0, 0, 0, 1, 2, 3, 1, 0];
    let mut tracker = ConstraintTracker::new(1);
    let mut old = sequence[0];
    println!("step phase  longest-green  max-phase-skips  max-green-skips   greentime phaseskip greenskip  total");
    for (step, &p) in sequence.iter().enumerate() {
        if p != old {
            tracker.update_phase_skip(0, old, p)?;
            tracker.update_green_skip(0, phases[old].green, phases[p].green)?;
        }
        // one green-time tick per decision step keeps the numbers small
        tracker.update_green_time(&[phases[p].green])?;
        old = p;

        let c = &tracker.counters()[0];
        let cost = tracker.compute_cost(&config);
        println!(
            "{step:>4} {p:>5} {:>14} {:>16} {:>16}   {:>9.3} {:>9.3} {:>9.3} {:>6.3}",
            c.green_time.iter().max().unwrap(),
            c.phase_skips.iter().max().unwrap(),
            c.green_skips.iter().max().unwrap(),
            cost.green_time,
            cost.phase_skip,
            cost.green_skip,
            cost.total
        );
    }
    Ok(())
}
