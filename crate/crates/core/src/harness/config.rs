//! Run configuration: a TOML document with dotted-key overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintConfig, ConstraintMode};
use crate::nn::EpsilonSchedule;
use crate::sim::SimConfig;
use crate::train::{Algorithm, TrainConfig};

use super::HarnessError;

pub const RUN_CONFIG_FORMAT_VERSION: u32 = 1;

/// Environment steps of a default run.
pub const DESK_ENV_STEPS: u64 = 50_000;

/// Where the road network comes from: a synthetic grid or a network file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSource {
    /// Grid shape such as `"2x2"`; ignored when `file` is set.
    pub grid: String,
    pub file: Option<PathBuf>,
}

impl Default for NetworkSource {
    fn default() -> Self {
        NetworkSource {
            grid: "2x2".into(),
            file: None,
        }
    }
}

/// Demand: a flow file, or seeded Poisson arrivals on the synthetic grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSource {
    pub file: Option<PathBuf>,
    /// Arrivals per second on each boundary entry road.
    pub intensity: f64,
    pub seed: u64,
}

impl Default for FlowSource {
    fn default() -> Self {
        FlowSource {
            file: None,
            intensity: 0.2,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    pub network: NetworkSource,
    pub flow: FlowSource,
    pub constraint: ConstraintConfig,
    pub sim: SimConfig,
    pub train: TrainConfig,
    /// Output directory; relative paths resolve against `ATSC_OUT` when set.
    pub out_dir: Option<PathBuf>,
    /// Evaluation rows averaged by `compare`.
    pub final_window: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            format_version: RUN_CONFIG_FORMAT_VERSION,
            network: NetworkSource::default(),
            flow: FlowSource::default(),
            constraint: ConstraintConfig::default(),
            sim: SimConfig::default(),
            // Desk-scale budget. Exploration reaches its floor after a fifth
            // of the run so most updates are close to on-policy.
            train: TrainConfig {
                total_env_steps: DESK_ENV_STEPS,
                epsilon: EpsilonSchedule {
                    anneal_steps: DESK_ENV_STEPS / 5,
                    ..EpsilonSchedule::default()
                },
                ..TrainConfig::default()
            },
            out_dir: None,
            final_window: 10,
        }
    }
}

/// Parses `"RxC"`.
pub fn parse_grid(s: &str) -> Result<(usize, usize), HarnessError> {
    let bad = || HarnessError::Config(format!("grid `{s}` is not of the form RxC"));
    let (r, c) = s.to_ascii_lowercase().split_once('x').map(|(a, b)| (a.to_string(), b.to_string())).ok_or_else(bad)?;
    let r: usize = r.trim().parse().map_err(|_| bad())?;
    let c: usize = c.trim().parse().map_err(|_| bad())?;
    if r == 0 || c == 0 {
        return Err(HarnessError::Config(format!("grid `{s}` needs at least one row and column")));
    }
    Ok((r, c))
}

fn parse_scalar(raw: &str) -> toml::Value {
    // Reuse the TOML grammar for numbers, booleans and arrays; anything else is a string.
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Sets `dotted.key = value` in a TOML tree, creating tables as needed.
pub fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<(), HarnessError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| HarnessError::Config(format!("override `{assignment}` is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(HarnessError::Config(format!("override key `{key}` is malformed")));
    }
    let mut table = root;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| HarnessError::Config(format!("override key `{key}`: `{part}` is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), parse_scalar(raw.trim()));
    Ok(())
}

impl RunConfig {
    /// Loads an optional config file, then applies overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, HarnessError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| HarnessError::Config(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::try_from(RunConfig::default()).expect("default config serializes"),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.format_version != RUN_CONFIG_FORMAT_VERSION {
            return Err(HarnessError::Config(format!(
                "unsupported run config format_version {} (expected {RUN_CONFIG_FORMAT_VERSION})",
                self.format_version
            )));
        }
        self.train.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.sim.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.constraint.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.final_window == 0 {
            return Err(HarnessError::Config("final_window must be at least 1".into()));
        }
        match (&self.network.file, &self.flow.file) {
            (Some(n), Some(f)) => {
                for p in [n, f] {
                    if !p.is_file() {
                        return Err(HarnessError::Config(format!("file not found: {}", p.display())));
                    }
                }
            }
            (Some(_), None) => return Err(HarnessError::Config("a network file needs a flow file".into())),
            (None, flow) => {
                parse_grid(&self.network.grid)?;
                if let Some(f) = flow {
                    if !f.is_file() {
                        return Err(HarnessError::Config(format!("file not found: {}", f.display())));
                    }
                } else if !(self.flow.intensity >= 0.0) {
                    return Err(HarnessError::Config("flow intensity must be non-negative".into()));
                }
            }
        }
        Ok(())
    }

    /// Default directory name when none is configured.
    pub fn run_name(&self) -> String {
        format!(
            "{}-{}-s{}",
            self.train.algorithm.name(),
            mode_name(self.constraint.mode),
            self.train.seed
        )
    }

    /// Output directory after applying the `ATSC_OUT` root.
    pub fn resolved_out_dir(&self) -> PathBuf {
        let dir = self.out_dir.clone().unwrap_or_else(|| PathBuf::from("runs").join(self.run_name()));
        match std::env::var_os("ATSC_OUT") {
            Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
            _ => dir,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}

pub fn mode_name(mode: ConstraintMode) -> &'static str {
    match mode {
        ConstraintMode::GreenTime => "greentime",
        ConstraintMode::PhaseSkip => "phaseskip",
        ConstraintMode::GreenSkip => "greenskip",
        ConstraintMode::All => "all",
    }
}

/// Algorithm names accepted on the command line.
pub fn algorithm_names() -> [&'static str; 3] {
    [Algorithm::MappoLce.name(), Algorithm::Mappo.name(), Algorithm::Ippo.name()]
}
