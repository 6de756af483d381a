use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::group::GroupSpec;
use crate::tree_exact::Precision;
use crate::walk::MeasureSpec;

/// Version of the run-configuration schema understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operation {
    Spheres,
    Pn,
    SpectralRadius,
    Green,
    Ancona,
    Avoidance,
    Pressure,
    SphereSums,
    Eta,
    Llt,
    Cesaro,
    Renewal,
    Cocycle,
    ValidateAutomaton,
}

impl Operation {
    pub const ALL: [Operation; 14] = [
        Operation::Spheres,
        Operation::Pn,
        Operation::SpectralRadius,
        Operation::Green,
        Operation::Ancona,
        Operation::Avoidance,
        Operation::Pressure,
        Operation::SphereSums,
        Operation::Eta,
        Operation::Llt,
        Operation::Cesaro,
        Operation::Renewal,
        Operation::Cocycle,
        Operation::ValidateAutomaton,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Operation::Spheres => "spheres",
            Operation::Pn => "pn",
            Operation::SpectralRadius => "spectral-radius",
            Operation::Green => "green",
            Operation::Ancona => "ancona",
            Operation::Avoidance => "avoidance",
            Operation::Pressure => "pressure",
            Operation::SphereSums => "sphere-sums",
            Operation::Eta => "eta",
            Operation::Llt => "llt",
            Operation::Cesaro => "cesaro",
            Operation::Renewal => "renewal",
            Operation::Cocycle => "cocycle",
            Operation::ValidateAutomaton => "validate-automaton",
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Operation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Operation::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown subcommand {s:?}")))
    }
}

/// Which Green-function backend to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Exact on free groups and free products, truncated series elsewhere.
    #[default]
    Auto,
    Tree,
    Series,
}

/// Operation parameters. Unset fields take per-operation defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_min: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prune_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_grid: Option<Vec<f64>>,
    /// Read r_grid as multiples of the radius of convergence R.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_relative: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Extra radius of the enclosing ball in avoidance runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<Backend>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<Precision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub automaton_file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub group: GroupSpec,
    /// Step distribution; the simple random walk when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureSpec>,
    pub operation: Operation,
    #[serde(default)]
    pub params: Params,
    #[serde(default = "output_dir")]
    pub output_dir: PathBuf,
    /// Distribution cache root; falls back to `$HYPERWALK_CACHE`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    /// Thread cap for parallel kernels; all cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn new(group: GroupSpec, operation: Operation) -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            group,
            measure: None,
            operation,
            params: Params::default(),
            output_dir: output_dir(),
            cache_dir: None,
            workers: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_value(value)
    }

    fn from_value(value: Value) -> Result<Self> {
        if let Some(op) = value.get("operation").and_then(Value::as_str) {
            op.parse::<Operation>()?;
        }
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Read a config file and apply overrides given as (dotted field path,
    /// value) pairs, e.g. `("params.n_max", 12)`.
    pub fn load(path: &Path, overrides: &[(String, Value)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut value: Value = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        if !value.is_object() {
            return Err(Error::Config("config must be a JSON object".into()));
        }
        for (key, v) in overrides {
            set_path(&mut value, key, v.clone())?;
        }
        Self::from_value(value)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hash of the canonical compact serialization.
    pub fn hash(&self) -> String {
        super::short_hash(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

fn set_path(root: &mut Value, key: &str, v: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("cannot set {key}: {part} is not an object")))?;
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    node.as_object_mut()
        .ok_or_else(|| Error::Config(format!("cannot set {key}")))?
        .insert(parts[parts.len() - 1].to_string(), v);
    Ok(())
}
