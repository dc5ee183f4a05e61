//! Per-run output directory bookkeeping and the run manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Every resolved option as it would appear in a config file.
    pub config: BTreeMap<String, String>,
    pub master_seed: Option<u64>,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub duration_seconds: f64,
}

pub fn file_record(path: &Path) -> CliResult<FileRecord> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut file = File::open(path).map_err(io)?;
    let mut hasher = Sha256::new();
    let bytes = std::io::copy(&mut file, &mut hasher).map_err(io)?;
    Ok(FileRecord {
        path: path.display().to_string(),
        bytes,
        sha256: format!("{:x}", hasher.finalize()),
    })
}

/// Tracks the files a command reads and writes.
pub struct Run {
    pub out_dir: PathBuf,
    started: Instant,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn new(out_dir: PathBuf) -> Self {
        Self {
            out_dir,
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn create(&mut self, name: &str) -> CliResult<BufWriter<File>> {
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", self.out_dir.display())))?;
        let path = self.out_dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.outputs.push(path);
        Ok(BufWriter::new(file))
    }

    /// Writes `manifest.json`; all output writers must be dropped by now.
    pub fn finish(
        self,
        command: &str,
        config: BTreeMap<String, String>,
        master_seed: Option<u64>,
    ) -> CliResult<PathBuf> {
        let manifest = RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            master_seed,
            inputs: self.inputs.iter().map(|p| file_record(p)).collect::<CliResult<_>>()?,
            outputs: self.outputs.iter().map(|p| file_record(p)).collect::<CliResult<_>>()?,
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        std::fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(path)
    }
}
