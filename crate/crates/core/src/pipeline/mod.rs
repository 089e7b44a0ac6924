//! Artifact plumbing behind the command-line tool. Every command writes into
//! a fresh directory and leaves a `manifest.json` (config hash, input and
//! output digests, tool version) next to its outputs; wall-clock times go to
//! `run.log` only, so repeated runs produce identical manifests.

mod commands;
mod config;

pub use commands::{
    cmd_analyze, cmd_corpus_stats, cmd_eval, cmd_gen_stimuli, cmd_run, cmd_synth, cmd_train, cmd_transform,
    AnalysisReport, ExperimentReport, RunOutputs, CHECKPOINT_FILE, CORPUS_FILE, PLOT_FILE, REPORT_FILE, STIMULI_FILE,
    SUMMARY_FILE, SURPRISAL_FILE, TRAIN_LOG_FILE, TRANSFORMED_FILE, TREES_FILE,
};
pub use config::{
    parse_override, BeamSection, CorpusFormat, CorpusSection, ModelKind, ModelSection, RunConfig, StimuliSection,
};

use std::fmt::Display;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOG_FILE: &str = "run.log";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{what} not found: {}", path.display())]
    MissingInput { what: &'static str, path: PathBuf },
    #[error("output directory {} already exists; refusing to overwrite", .0.display())]
    OutputExists(PathBuf),
    #[error("{}: {message}", path.display())]
    File { path: PathBuf, message: String },
    #[error("{0}")]
    Failed(String),
}

impl PipelineError {
    pub fn file(path: &Path, err: impl Display) -> PipelineError {
        PipelineError::File {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub tool: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    /// Paths relative to the run directory.
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(|e| PipelineError::file(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn unix_millis() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

/// A run directory being filled by one command.
pub(crate) struct RunDir {
    root: PathBuf,
    inputs: Vec<FileDigest>,
    outputs: Vec<String>,
    log: Vec<String>,
}

impl RunDir {
    /// Creates `root`, which must not exist yet.
    pub(crate) fn create(root: &Path) -> Result<RunDir, PipelineError> {
        if root.exists() {
            return Err(PipelineError::OutputExists(root.to_path_buf()));
        }
        fs::create_dir_all(root).map_err(|e| PipelineError::file(root, e))?;
        Ok(RunDir {
            root: root.to_path_buf(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            log: vec![format!("started_unix_ms={}", unix_millis())],
        })
    }

    pub(crate) fn input(&mut self, path: &Path) -> Result<(), PipelineError> {
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    /// Registers an output file (relative name) and returns its full path.
    pub(crate) fn output(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.root.join(name)
    }

    pub(crate) fn log(&mut self, line: impl Into<String>) {
        self.log.push(line.into());
    }

    pub(crate) fn finish(mut self, command: &str, cfg: &RunConfig) -> Result<PathBuf, PipelineError> {
        let fingerprint = cfg.fingerprint();
        let mut outputs = Vec::with_capacity(self.outputs.len());
        for name in &self.outputs {
            outputs.push(FileDigest {
                path: name.clone(),
                sha256: sha256_file(&self.root.join(name))?,
            });
        }
        let manifest = Manifest {
            command: command.to_string(),
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            config_sha256: hex::encode(Sha256::digest(fingerprint.as_bytes())),
            config: serde_json::from_str(&fingerprint).expect("fingerprint is JSON"),
            inputs: std::mem::take(&mut self.inputs),
            outputs,
        };
        let path = self.root.join(MANIFEST_FILE);
        write_json(&path, &manifest)?;
        self.log.push(format!("command={command}"));
        self.log.push(format!("finished_unix_ms={}", unix_millis()));
        let log_path = self.root.join(LOG_FILE);
        fs::write(&log_path, self.log.join("\n") + "\n").map_err(|e| PipelineError::file(&log_path, e))?;
        Ok(path)
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let file = File::create(path).map_err(|e| PipelineError::file(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| PipelineError::file(path, e))?;
    w.write_all(b"\n").map_err(|e| PipelineError::file(path, e))?;
    w.flush().map_err(|e| PipelineError::file(path, e))
}

pub(crate) fn create_file(path: &Path) -> Result<BufWriter<File>, PipelineError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| PipelineError::file(path, e))
}

pub(crate) fn open_file(what: &'static str, path: &Path) -> Result<std::io::BufReader<File>, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingInput {
            what,
            path: path.to_path_buf(),
        });
    }
    File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|e| PipelineError::file(path, e))
}
