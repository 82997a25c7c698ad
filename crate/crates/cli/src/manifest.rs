use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Result;
use serde::Serialize;

/// Provenance of one command run, written next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub seeds: Seeds,
    pub version: String,
    pub out_dir: PathBuf,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Seeds {
    pub scenario: u64,
    pub collection: u64,
    pub tuning: u64,
}

pub fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl RunManifest {
    pub fn version() -> &'static str {
        env!("EZDEEPC_BUILD_VERSION")
    }

    pub fn record(&mut self, file: &str) {
        self.outputs.push(file.to_string());
    }

    pub fn finish(mut self, dir: &Path) -> Result<()> {
        self.finished_unix = Some(now_unix());
        self.outputs.sort();
        let text = serde_json::to_string_pretty(&self)?;
        std::fs::write(dir.join("manifest.json"), text)?;
        Ok(())
    }
}
