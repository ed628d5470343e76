//! Training runs and their artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::sim::{gen_grid_with, load_flow, load_network, FlowDocument, GridSpec, RoadNetwork};
use crate::train::{MetricsRow, TrainError, Trainer};

use super::config::{parse_grid, RunConfig};
use super::HarnessError;

pub const MANIFEST_FORMAT_VERSION: u32 = 1;
pub const METRICS_FILE: &str = "metrics.csv";
pub const UPDATES_FILE: &str = "updates.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub seed: u64,
    pub git_describe: String,
    /// How `compare` aggregates: mean of the last `final_window` evaluation rows.
    pub final_window_rule: String,
    pub env_steps: u64,
    pub iterations: u64,
    pub config: RunConfig,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub metrics: Vec<MetricsRow>,
    pub manifest: RunManifest,
}

/// `git describe --always --dirty`, or `"unknown"` outside a checkout.
pub fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))
}

/// Builds the network and flow named by `config`.
pub fn load_environment(config: &RunConfig) -> Result<(Arc<RoadNetwork>, Arc<FlowDocument>), HarnessError> {
    let cfg_err = |e: &dyn std::fmt::Display, p: &Path| HarnessError::Config(format!("{}: {e}", p.display()));
    let (network, generated_flow) = match &config.network.file {
        Some(path) => (load_network(&read(path)?).map_err(|e| cfg_err(&e, path))?, None),
        None => {
            let (rows, cols) = parse_grid(&config.network.grid)?;
            let (doc, flow) = gen_grid_with(&GridSpec {
                rows,
                cols,
                intensity: config.flow.intensity,
                seed: config.flow.seed,
                horizon: config.sim.episode_seconds(),
                ..GridSpec::default()
            });
            let net = RoadNetwork::from_document(doc).map_err(|e| HarnessError::Config(e.to_string()))?;
            (net, Some(flow))
        }
    };
    let flow = match (&config.flow.file, generated_flow) {
        (Some(path), _) => load_flow(&read(path)?).map_err(|e| cfg_err(&e, path))?,
        (None, Some(flow)) => flow,
        (None, None) => return Err(HarnessError::Config("a network file needs a flow file".into())),
    };
    flow.validate(&network).map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok((Arc::new(network), Arc::new(flow)))
}

pub fn write_metrics_csv<W: std::io::Write>(rows: &[MetricsRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn runtime<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> HarnessError + '_ {
    move |e| HarnessError::Runtime(format!("{context}: {e}"))
}

/// Trains per `config` and writes `metrics.csv`, `updates.csv`,
/// `checkpoint.txt` and `manifest.json` into the output directory.
pub fn run(config: &RunConfig) -> Result<RunOutcome, HarnessError> {
    config.validate()?;
    let (network, flow) = load_environment(config)?;
    let out_dir = config.resolved_out_dir();
    fs::create_dir_all(&out_dir).map_err(runtime(&format!("cannot create {}", out_dir.display())))?;
    let mut trainer = Trainer::new(config.train.clone(), network, flow, config.sim.clone(), config.constraint.clone())
        .map_err(|e| match e {
            TrainError::Config(m) => HarnessError::Config(m),
            other => HarnessError::Runtime(other.to_string()),
        })?;
    let report = trainer.run(|_| {}).map_err(runtime("training failed"))?;

    let metrics_path = out_dir.join(METRICS_FILE);
    let file = fs::File::create(&metrics_path).map_err(runtime(&metrics_path.display().to_string()))?;
    write_metrics_csv(&report.metrics, file).map_err(runtime(&metrics_path.display().to_string()))?;

    let updates_path = out_dir.join(UPDATES_FILE);
    let mut w = csv::Writer::from_path(&updates_path).map_err(runtime(&updates_path.display().to_string()))?;
    w.write_record(["iteration", "lambda", "actor_loss", "reward_td_loss", "cost_td_loss", "estimator_loss"])
        .and_then(|_| {
            for (it, s) in &report.updates {
                w.write_record([
                    it.to_string(),
                    s.lambda.to_string(),
                    s.actor_loss.to_string(),
                    s.reward_td_loss.to_string(),
                    s.cost_td_loss.to_string(),
                    s.estimator_loss.to_string(),
                ])?;
            }
            w.flush().map_err(csv::Error::from)
        })
        .map_err(runtime(&updates_path.display().to_string()))?;

    trainer
        .checkpoint()
        .save(&out_dir.join(CHECKPOINT_FILE))
        .map_err(runtime("checkpoint write failed"))?;

    let manifest = RunManifest {
        format_version: MANIFEST_FORMAT_VERSION,
        seed: config.train.seed,
        git_describe: git_describe(),
        final_window_rule: format!("mean of the last {} evaluation rows", config.final_window),
        env_steps: report.env_steps,
        iterations: report.iterations,
        config: config.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(out_dir.join(MANIFEST_FILE), text).map_err(runtime("manifest write failed"))?;
    Ok(RunOutcome {
        out_dir,
        metrics: report.metrics,
        manifest,
    })
}

/// Writes `network.json` and `flow.json` for a synthetic grid.
pub fn gen_grid_files(spec: &GridSpec, out_dir: &Path) -> Result<(PathBuf, PathBuf), HarnessError> {
    if spec.rows == 0 || spec.cols == 0 {
        return Err(HarnessError::Config("grid needs at least one row and column".into()));
    }
    if !(spec.intensity >= 0.0) {
        return Err(HarnessError::Config("intensity must be non-negative".into()));
    }
    let (network, flow) = gen_grid_with(spec);
    fs::create_dir_all(out_dir).map_err(runtime(&format!("cannot create {}", out_dir.display())))?;
    let net_path = out_dir.join("network.json");
    let flow_path = out_dir.join("flow.json");
    let write = |path: &Path, text: String| fs::write(path, text).map_err(runtime(&path.display().to_string()));
    write(&net_path, serde_json::to_string_pretty(&network).expect("network serializes"))?;
    write(&flow_path, serde_json::to_string_pretty(&flow).expect("flow serializes"))?;
    Ok((net_path, flow_path))
}
