//! Run artifacts: per-command JSON summaries, CSV tables and the band cache.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use quantlab::series::ConvergenceSeries;
use quantlab::spectral::Backend;

use crate::config::{ExperimentConfig, ModelSpec};
use crate::CliError;

/// Acceptance criteria by number, with the command producing each.
pub const CRITERIA: [(u8, &str, &str); 14] = [
    (1, "spectral gap", "spectrum"),
    (2, "dimension law", "spectrum"),
    (3, "pullback rates", "embed"),
    (4, "approximate holomorphy", "embed"),
    (5, "density law", "embed"),
    (6, "off-diagonal decay", "embed"),
    (7, "reproducing property", "embed"),
    (8, "injectivity", "embed"),
    (9, "Wick symbol", "dynamics"),
    (10, "tangential angle", "dynamics"),
    (11, "variance law", "dynamics"),
    (12, "hyperplane rates", "hyperplane"),
    (13, "oracle equivalence", "embed"),
    (14, "determinism and cache integrity", "spectrum"),
];

pub const COMMANDS: [&str; 4] = ["spectrum", "embed", "dynamics", "hyperplane"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub package: String,
    pub version: String,
    pub os: String,
    pub arch: String,
}

impl Environment {
    pub fn current() -> Self {
        Environment {
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub name: String,
    pub model: quantlab::geometry::ManifoldModel,
    pub backend: Backend,
    pub ks: Vec<u32>,
    /// Spacing constant c per k (h ≤ c/√k); unused by the exact backend.
    pub resolution: Vec<f64>,
}

impl ModelRecord {
    pub fn new(spec: &ModelSpec, model: &quantlab::geometry::ManifoldModel) -> Self {
        ModelRecord {
            name: spec.name.clone(),
            model: model.clone(),
            backend: spec.backend,
            ks: spec.ks.clone(),
            resolution: spec.ks.iter().map(|&k| spec.resolution_at(k)).collect(),
        }
    }
}

/// One verdict of one criterion on one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionEntry {
    pub id: u8,
    pub model: String,
    pub backend: Backend,
    pub pass: bool,
    pub summary: String,
    pub values: BTreeMap<String, Value>,
    pub series: Vec<ConvergenceSeries>,
}

/// Measured quantity reported without a verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub name: String,
    pub model: String,
    pub summary: String,
    pub series: Vec<ConvergenceSeries>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandOutput {
    pub command: String,
    pub seed: u64,
    pub environment: Environment,
    pub models: Vec<ModelRecord>,
    pub criteria: Vec<CriterionEntry>,
    pub audit: Vec<AuditEntry>,
}

impl CommandOutput {
    pub fn new(command: &str, cfg: &ExperimentConfig, models: Vec<ModelRecord>) -> Self {
        CommandOutput {
            command: command.into(),
            seed: cfg.run.seed,
            environment: Environment::current(),
            models,
            criteria: Vec::new(),
            audit: Vec::new(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }
}

/// Builder for the `values` map of an entry.
#[derive(Default)]
pub struct Values(BTreeMap<String, Value>);

impl Values {
    pub fn with(mut self, key: &str, v: impl Serialize) -> Self {
        self.0.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
        self
    }

    pub fn into_map(self) -> BTreeMap<String, Value> {
        self.0
    }
}

/// Output directory with the fixed file layout of a run.
#[derive(Clone, Debug)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("cannot create {}: {e}", root.display())))?;
        Ok(RunDir { root: root.to_path_buf() })
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.root.join("cache")
    }

    pub fn summary_path(&self, command: &str) -> PathBuf {
        self.root.join(format!("{command}.json"))
    }

    pub fn write(&self, name: &str, text: &str) -> Result<(), CliError> {
        let p = self.root.join(name);
        if let Some(d) = p.parent() {
            fs::create_dir_all(d).map_err(|e| CliError::Io(format!("cannot create {}: {e}", d.display())))?;
        }
        fs::write(&p, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display())))
    }

    pub fn write_json(&self, name: &str, v: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn write_summary(&self, out: &CommandOutput) -> Result<(), CliError> {
        self.write_json(&format!("{}.json", out.command), out)
    }
}

/// Format a float for CSV cells.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Slope of a series for summaries; series at the noise floor read "exact".
pub fn slope_text(s: &ConvergenceSeries) -> String {
    if s.at_noise_floor() {
        format!("{} exact (≤ 1e-12 at every k)", s.name)
    } else {
        format!("{} slope {:.3}", s.name, s.slope)
    }
}
