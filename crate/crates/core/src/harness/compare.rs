//! Percentage-improvement tables over completed runs.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::train::MetricsRow;

use super::run::{RunManifest, MANIFEST_FILE, METRICS_FILE};
use super::HarnessError;

/// Metric name and whether larger values are better.
pub const COMPARED_METRICS: [(&str, bool); 4] = [
    ("test_reward", true),
    ("throughput", true),
    ("avg_delay", false),
    ("cost_total", false),
];

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub metrics: Vec<MetricsRow>,
}

pub fn load_run(dir: &Path) -> Result<RunRecord, HarnessError> {
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read_to_string(&p).map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", p.display())))
    };
    let manifest: RunManifest = serde_json::from_str(&read(MANIFEST_FILE)?)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", dir.join(MANIFEST_FILE).display())))?;
    let text = read(METRICS_FILE)?;
    let metrics = csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<Vec<MetricsRow>, _>>()
        .map_err(|e| HarnessError::Config(format!("{}: {e}", dir.join(METRICS_FILE).display())))?;
    if metrics.is_empty() {
        return Err(HarnessError::Config(format!("{} has no evaluation rows", dir.display())));
    }
    Ok(RunRecord {
        dir: dir.to_path_buf(),
        manifest,
        metrics,
    })
}

fn metric(row: &MetricsRow, name: &str) -> f64 {
    match name {
        "test_reward" => row.test_reward,
        "throughput" => row.throughput,
        "avg_delay" => row.avg_delay,
        "cost_total" => row.cost_total,
        other => unreachable!("unknown metric {other}"),
    }
}

/// Mean of `name` over the last `window` rows.
pub fn final_mean(rows: &[MetricsRow], name: &str, window: usize) -> f64 {
    let tail = &rows[rows.len().saturating_sub(window)..];
    tail.iter().map(|r| metric(r, name)).sum::<f64>() / tail.len() as f64
}

/// `100 (a - b) / |b|`, sign-flipped when smaller is better.
pub fn improvement(a: f64, b: f64, higher_is_better: bool) -> f64 {
    let raw = 100.0 * (a - b) / b.abs();
    if higher_is_better {
        raw
    } else {
        -raw
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricSummary {
    pub name: &'static str,
    /// Final-window mean per run, in input order.
    pub means: Vec<f64>,
    /// Improvement of the first run over each run, in input order.
    pub improvements: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub runs: Vec<PathBuf>,
    pub window: usize,
    pub metrics: Vec<MetricSummary>,
}

/// Settings that must agree for runs to be comparable.
fn compatibility_key(m: &RunManifest) -> Vec<(&'static str, String)> {
    let c = &m.config;
    vec![
        ("network", format!("{:?}", c.network)),
        ("flow", format!("{:?}", c.flow)),
        ("constraint", format!("{:?}", c.constraint)),
        ("sim", format!("{:?}", c.sim)),
        ("train.total_env_steps", c.train.total_env_steps.to_string()),
        ("final_window", c.final_window.to_string()),
    ]
}

pub fn compare_records(records: &[RunRecord]) -> Result<Comparison, HarnessError> {
    if records.len() < 2 {
        return Err(HarnessError::Config("compare needs at least two runs".into()));
    }
    let base = compatibility_key(&records[0].manifest);
    for r in &records[1..] {
        for ((field, a), (_, b)) in base.iter().zip(compatibility_key(&r.manifest)) {
            if *a != b {
                return Err(HarnessError::Config(format!(
                    "runs {} and {} differ in `{field}`",
                    records[0].dir.display(),
                    r.dir.display()
                )));
            }
        }
    }
    let window = records[0].manifest.config.final_window;
    let metrics = COMPARED_METRICS
        .iter()
        .map(|&(name, higher)| {
            let means: Vec<f64> = records.iter().map(|r| final_mean(&r.metrics, name, window)).collect();
            let improvements = means.iter().map(|&m| improvement(means[0], m, higher)).collect();
            MetricSummary {
                name,
                means,
                improvements,
            }
        })
        .collect();
    Ok(Comparison {
        runs: records.iter().map(|r| r.dir.clone()).collect(),
        window,
        metrics,
    })
}

pub fn compare(run_dirs: &[PathBuf]) -> Result<Comparison, HarnessError> {
    let records = run_dirs.iter().map(|d| load_run(d)).collect::<Result<Vec<_>, _>>()?;
    compare_records(&records)
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "final window: last {} evaluation rows", self.window)?;
        for (i, run) in self.runs.iter().enumerate() {
            writeln!(f, "[{i}] {}", run.display())?;
        }
        write!(f, "{:<12}", "metric")?;
        for i in 0..self.runs.len() {
            write!(f, " {:>14}", format!("mean[{i}]"))?;
        }
        for i in 1..self.runs.len() {
            write!(f, " {:>12}", format!("[0] vs [{i}]"))?;
        }
        writeln!(f)?;
        for m in &self.metrics {
            write!(f, "{:<12}", m.name)?;
            for v in &m.means {
                write!(f, " {v:>14.3}")?;
            }
            for v in &m.improvements[1..] {
                if v.is_finite() {
                    write!(f, " {:>11.2}%", v)?;
                } else {
                    write!(f, " {:>12}", "n/a")?;
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
