use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use robust_halfspace::ModelFile;

/// One JSON object per command invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub version: String,
    pub seed: u64,
    /// Fully resolved flags; feeding this back through `--config` reruns
    /// the command.
    pub config: Value,
    /// Deterministic outputs of the run.
    pub metrics: Map<String, Value>,
    /// Wall-clock measurements, kept apart from the deterministic metrics.
    pub timing: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelFile>,
    pub artifacts: Vec<String>,
}

impl RunRecord {
    pub fn new(command: &str, seed: u64, config: Value) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            metrics: Map::new(),
            timing: Map::new(),
            model: None,
            artifacts: Vec::new(),
        }
    }

    pub fn metric(&mut self, key: &str, value: impl Into<Value>) {
        self.metrics.insert(key.to_string(), value.into());
    }

    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.display().to_string());
    }
}
