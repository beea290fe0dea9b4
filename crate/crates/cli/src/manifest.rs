use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

/// Record written next to the outputs of every run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub args: Vec<String>,
    pub config: Value,
    pub outputs: Vec<PathBuf>,
    /// Seconds per dimensionless time unit, when the outputs use one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_unit_s: Option<f64>,
    pub notes: Vec<String>,
    pub wall_clock_s: f64,
    #[serde(skip)]
    started: Option<Instant>,
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            args: std::env::args().skip(1).collect(),
            config: Value::Null,
            outputs: Vec::new(),
            time_unit_s: None,
            notes: Vec::new(),
            wall_clock_s: 0.0,
            started: Some(Instant::now()),
        }
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn write(mut self, dir: &Path) -> std::io::Result<PathBuf> {
        if let Some(t) = self.started {
            self.wall_clock_s = t.elapsed().as_secs_f64();
        }
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        fs::write(&path, text + "\n")?;
        Ok(path)
    }
}
