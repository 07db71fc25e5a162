use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use catmc::Result;

use crate::output::write_json;

/// Record of one command invocation, written as `manifest.json` in the output directory.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    /// Every argument after defaults were applied.
    pub args: Value,
    /// Settings resolved from config files or defaults.
    pub config: Value,
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub duration_secs: f64,
}

pub struct Recorder {
    started: Instant,
    manifest: RunManifest,
}

impl Recorder {
    pub fn start(command: &str, seed: Option<u64>, args: &impl Serialize) -> Self {
        Self {
            started: Instant::now(),
            manifest: RunManifest {
                command: command.to_string(),
                version: format!("catmc {}", env!("CARGO_PKG_VERSION")),
                seed,
                args: serde_json::to_value(args).unwrap_or(Value::Null),
                config: Value::Null,
                outputs: Vec::new(),
                warnings: Vec::new(),
                duration_secs: 0.0,
            },
        }
    }

    pub fn config(&mut self, config: &impl Serialize) {
        self.manifest.config = serde_json::to_value(config).unwrap_or(Value::Null);
    }

    pub fn output(&mut self, path: &Path) {
        self.manifest.outputs.push(path.to_path_buf());
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::warn!("{msg}");
        self.manifest.warnings.push(msg);
    }

    pub fn finish(mut self, dir: &Path) -> Result<()> {
        self.manifest.duration_secs = self.started.elapsed().as_secs_f64();
        write_json(&dir.join("manifest.json"), &self.manifest)
    }
}
