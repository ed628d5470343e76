use std::path::PathBuf;
use std::process::ExitCode;

use atsc::harness::{compare, gen_grid_files, run, HarnessError, RunConfig};
use atsc::sim::GridSpec;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "atsc", version, about = "Constrained multi-agent traffic signal control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run and write metrics, checkpoint and manifest.
    Run {
        /// TOML run configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `dotted.key=value`, applied after the file, in order.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Synthetic grid shape, e.g. 2x2 (network.grid).
        #[arg(long)]
        grid: Option<String>,
        /// mappo-lce, mappo or ippo (train.algorithm).
        #[arg(long)]
        algo: Option<String>,
        /// greentime, phaseskip, greenskip or all (constraint.mode).
        #[arg(long)]
        constraint: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Total environment steps (train.total_env_steps); exploration
        /// anneals over the first fifth.
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write network.json and flow.json for an R x C grid.
    GenGrid {
        rows: usize,
        cols: usize,
        #[arg(long, default_value_t = 0.2)]
        intensity: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Percentage improvement of the first run over the others.
    Compare {
        #[arg(required = true, num_args = 2..)]
        dirs: Vec<PathBuf>,
    },
}

fn quoted(s: &str) -> String {
    format!("{s:?}")
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run {
            config,
            mut overrides,
            grid,
            algo,
            constraint,
            seed,
            steps,
            out,
        } => {
            let mut flags = Vec::new();
            if let Some(g) = grid {
                flags.push(format!("network.grid={}", quoted(&g)));
            }
            if let Some(a) = algo {
                flags.push(format!("train.algorithm={}", quoted(&a.to_ascii_lowercase())));
            }
            if let Some(c) = constraint {
                flags.push(format!("constraint.mode={}", quoted(&c.to_ascii_lowercase())));
            }
            if let Some(s) = seed {
                flags.push(format!("train.seed={s}"));
            }
            if let Some(s) = steps {
                flags.push(format!("train.total_env_steps={s}"));
                flags.push(format!("train.epsilon.anneal_steps={}", s / 5));
            }
            if let Some(o) = out {
                flags.push(format!("out_dir={}", quoted(&o.to_string_lossy())));
            }
            flags.append(&mut overrides);
            let config = RunConfig::load(config.as_deref(), &flags)?;
            let outcome = run(&config)?;
            let last = outcome.metrics.last();
            println!("wrote {}", outcome.out_dir.display());
            if let Some(row) = last {
                println!(
                    "step {} test_reward {:.1} throughput {} avg_delay {:.2} cost_total {:.4} lambda {:.6}",
                    row.step, row.test_reward, row.throughput, row.avg_delay, row.cost_total, row.lambda
                );
            }
        }
        Command::GenGrid {
            rows,
            cols,
            intensity,
            seed,
            out,
        } => {
            let spec = GridSpec {
                rows,
                cols,
                intensity,
                seed,
                ..GridSpec::default()
            };
            let (net, flow) = gen_grid_files(&spec, &out)?;
            println!("wrote {} and {}", net.display(), flow.display());
        }
        Command::Compare { dirs } => print!("{}", compare(&dirs)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("atsc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
