//! Writes a synthetic grid network and its demand as JSON.
//!
//! cargo run --example gen_grid -- 3 3 /tmp/grid3x3

use std::path::PathBuf;

use atsc::harness::gen_grid_files;
use atsc::sim::{load_network, GridSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let rows = args.next().map_or(Ok(2), |s| s.parse())?;
    let cols = args.next().map_or(Ok(2), |s| s.parse())?;
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("atsc-grid"));

    let spec = GridSpec {
        rows,
        cols,
        ..GridSpec::default()
    };
    let (network, flow) = gen_grid_files(&spec, &out)?;
    let net = load_network(&std::fs::read_to_string(&network)?)?;
    println!("{}", network.display());
    println!("{}", flow.display());
    println!(
        "{} intersections, {} roads, {:.2} vehicles/s per entry road",
        net.intersections.len(),
        net.roads.len(),
        spec.intensity
    );
    Ok(())
}
