//! Run manifest (schema version 1), written as `manifest.json`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::sha256_hex;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningRecord {
    pub scale: f64,
    /// `config` when given, `tuned` when found by pilot runs, `default` otherwise.
    pub source: String,
    pub goal: Option<f64>,
    pub pilot_rate: Option<f64>,
    pub rounds: Option<usize>,
    pub stream_id: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub ess: f64,
    pub acceptance_rate: f64,
    pub factory_calls: u64,
    pub total_loops: u64,
    pub max_loops: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: u32,
    pub seed: u64,
    pub stream_id: u64,
    pub status: String,
    pub error: Option<String>,
    pub wall_time_sec: Option<f64>,
    pub trace_file: Option<String>,
    pub summary: Option<ReplicationSummary>,
}

impl ReplicationRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub software_version: String,
    pub config: ExperimentConfig,
    /// Stream used for synthetic data, when the experiment simulates any.
    pub data_stream_id: Option<u64>,
    pub tuning: TuningRecord,
    pub replications: Vec<ReplicationRecord>,
    pub total_wall_time_sec: f64,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn failed(&self) -> impl Iterator<Item = &ReplicationRecord> {
        self.replications.iter().filter(|r| !r.is_ok())
    }

    /// Checks every inventoried file against its recorded size and checksum.
    pub fn verify_outputs(&self, dir: &Path) -> CliResult<()> {
        for f in &self.outputs {
            let path = dir.join(&f.path);
            let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
            if bytes.len() as u64 != f.bytes || sha256_hex(&bytes) != f.sha256 {
                return Err(CliError::Inventory(format!("{} does not match its recorded checksum", f.path)));
            }
        }
        Ok(())
    }
}
