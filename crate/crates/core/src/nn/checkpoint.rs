//! Version-tagged text checkpoints of flat parameter arrays.
//!
//! ```text
//! atsc-checkpoint format_version=1
//! scalar <name> <value>
//! net <name> <size_0> <size_1> ... <size_k>
//! <param> <param> ...            (one line, param_count(sizes) values)
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so a load after a
//! save reproduces every parameter bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use super::dense::{param_count, DenseNet};
use super::NnError;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "atsc-checkpoint";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub scalars: Vec<(String, f64)>,
    pub nets: Vec<(String, DenseNet)>,
}

fn check_name(name: &str) -> Result<(), NnError> {
    if name.is_empty() || name.contains(char::is_whitespace) {
        return Err(NnError::Format(format!("invalid checkpoint entry name `{name}`")));
    }
    Ok(())
}

impl Checkpoint {
    pub fn add_scalar(&mut self, name: &str, value: f64) {
        self.scalars.push((name.to_string(), value));
    }

    pub fn add_net(&mut self, name: &str, net: &DenseNet) {
        self.nets.push((name.to_string(), net.clone()));
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalars.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn net(&self, name: &str) -> Option<&DenseNet> {
        self.nets.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn to_text(&self) -> Result<String, NnError> {
        let mut out = format!("{MAGIC} format_version={CHECKPOINT_FORMAT_VERSION}\n");
        for (name, v) in &self.scalars {
            check_name(name)?;
            writeln!(out, "scalar {name} {v}").expect("string write");
        }
        for (name, net) in &self.nets {
            check_name(name)?;
            let sizes: Vec<String> = net.sizes().iter().map(|s| s.to_string()).collect();
            writeln!(out, "net {name} {}", sizes.join(" ")).expect("string write");
            let params: Vec<String> = net.params().iter().map(|p| p.to_string()).collect();
            writeln!(out, "{}", params.join(" ")).expect("string write");
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self, NnError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| NnError::Format("empty checkpoint".into()))?;
        let expected = format!("{MAGIC} format_version={CHECKPOINT_FORMAT_VERSION}");
        if header.trim() != expected {
            return Err(NnError::Format(format!("unsupported checkpoint header `{header}`")));
        }
        let mut ckpt = Checkpoint::default();
        while let Some(line) = lines.next() {
            let mut parts = line.split_whitespace();
            match parts.next() {
                None => continue,
                Some("scalar") => {
                    let name = parts.next().ok_or_else(|| NnError::Format("scalar without name".into()))?;
                    let value = parts
                        .next()
                        .and_then(|v| v.parse::<f64>().ok())
                        .ok_or_else(|| NnError::Format(format!("scalar `{name}` has no numeric value")))?;
                    ckpt.scalars.push((name.to_string(), value));
                }
                Some("net") => {
                    let name = parts.next().ok_or_else(|| NnError::Format("net without name".into()))?;
                    let sizes: Vec<usize> = parts
                        .map(|s| s.parse::<usize>())
                        .collect::<Result<_, _>>()
                        .map_err(|e| NnError::Format(format!("net `{name}` sizes: {e}")))?;
                    if sizes.len() < 2 || sizes.contains(&0) {
                        return Err(NnError::Format(format!("net `{name}` has invalid sizes {sizes:?}")));
                    }
                    let body = lines
                        .next()
                        .ok_or_else(|| NnError::Format(format!("net `{name}` is missing its parameter line")))?;
                    let params: Vec<f64> = body
                        .split_whitespace()
                        .map(|s| s.parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|e| NnError::Format(format!("net `{name}` params: {e}")))?;
                    if params.len() != param_count(&sizes) {
                        return Err(NnError::Format(format!(
                            "net `{name}` has {} params, shape needs {}",
                            params.len(),
                            param_count(&sizes)
                        )));
                    }
                    ckpt.nets.push((name.to_string(), DenseNet::from_params(&sizes, params)?));
                }
                Some(other) => return Err(NnError::Format(format!("unknown checkpoint record `{other}`"))),
            }
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        std::fs::write(path, self.to_text()?).map_err(|e| NnError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let text = std::fs::read_to_string(path).map_err(|e| NnError::Io(format!("{}: {e}", path.display())))?;
        Checkpoint::from_text(&text)
    }
}
