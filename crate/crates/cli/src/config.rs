//! Run configuration: one JSON document, optionally patched by
//! `--set a.b=value` overrides, then checked against a strict schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use statusnet_core::altmodel::AltParams;
use statusnet_core::centrality::ModelParams;
use statusnet_core::equilibrium::PrestigeParams;
use statusnet_core::generate::RandomBlockSpec;
use statusnet_core::inequality::{CommunitiesSpec, DensityPoint, TransferSpec};
use statusnet_core::net::AgentId;

use crate::CliError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    #[default]
    Base,
    Prestige,
    Alt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub model: Model,
    pub network: NetworkSource,
    #[serde(default)]
    pub params: Option<ModelParams>,
    #[serde(default)]
    pub prestige: Option<PrestigeParams>,
    #[serde(default)]
    pub alt: Option<AltParams>,
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<OutputSpec>,
    /// Fail on unmet Assumption 2 or an active zero clamp.
    #[serde(default = "yes")]
    pub enforce_assumptions: bool,
}

fn yes() -> bool {
    true
}

/// Where the network comes from. A string is a path relative to the config
/// file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetworkSource {
    Path(PathBuf),
    Generated(Generated),
    Inline(Value),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Generated {
    Communities(CommunitiesSpec),
    RandomBlock(RandomBlockSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// JSON for solutions and CSV for experiment tables when absent.
    #[serde(default)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    Solve,
    /// Income derivatives for the listed `(j, k)` pairs, or every pair.
    Compstat {
        #[serde(default)]
        pairs: Option<Vec<(AgentId, AgentId)>>,
    },
    /// Income shock to each listed community, or to every community.
    Prop2 {
        #[serde(default)]
        communities: Option<Vec<usize>>,
        #[serde(default)]
        epsilon: Option<f64>,
    },
    Inequality {
        transfers: Vec<TransferSpec>,
        #[serde(default)]
        density_profile: Option<Vec<DensityPoint>>,
    },
    /// Link swaps `(j, k, l)`, or every valid swap.
    HomophilySwap {
        #[serde(default)]
        swaps: Option<Vec<(AgentId, AgentId, AgentId)>>,
    },
    Nbar,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Solve => "solve",
            Experiment::Compstat { .. } => "compstat",
            Experiment::Prop2 { .. } => "prop2",
            Experiment::Inequality { .. } => "inequality",
            Experiment::HomophilySwap { .. } => "homophily_swap",
            Experiment::Nbar => "nbar",
        }
    }
}

/// A parsed config plus the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: Config,
    pub base_dir: PathBuf,
}

impl Loaded {
    pub fn params(&self) -> Result<ModelParams, CliError> {
        let p = self.config.params.ok_or_else(|| CliError::Schema("missing \"params\"".into()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}

pub fn load(path: &Path, overrides: &[String]) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let config: Config = serde_json::from_value(value).map_err(|e| CliError::Schema(e.to_string()))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, base_dir })
}

/// Applies `a.b.c=value`. The value is read as JSON when it parses and as
/// a plain string otherwise; missing objects along the path are created.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Schema(format!("override {assignment:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Schema(format!("bad override path {path:?}")));
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        if !node.is_object() {
            return Err(CliError::Schema(format!("override {path:?} descends into a non-object")));
        }
        node = node
            .as_object_mut()
            .expect("checked above")
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    match node.as_object_mut() {
        Some(obj) => {
            obj.insert(keys[keys.len() - 1].to_string(), value);
            Ok(())
        }
        None => Err(CliError::Schema(format!("override {path:?} descends into a non-object"))),
    }
}
