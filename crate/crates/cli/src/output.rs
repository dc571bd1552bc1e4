//! Result files. Every JSON and CSV file carries the tool version and the
//! config hash; wall-clock data goes to a separate `manifest.json` so the
//! result files stay byte-identical across reruns.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const TOOL: &str = "mather";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
struct Envelope<'a, T> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_hash: &'a str,
    seed: u64,
    config: &'a RunConfig,
    result: &'a T,
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_hash: &'a str,
    seed: u64,
    started_unix: f64,
    finished_unix: f64,
    elapsed_secs: f64,
    workers: usize,
    exit_code: i32,
    files: Vec<FileEntry>,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Serialized writer for one run's output directory.
pub struct OutputSet<'a> {
    cfg: &'a RunConfig,
    hash: String,
    started: f64,
    files: Vec<(PathBuf, String)>,
}

impl<'a> OutputSet<'a> {
    pub fn new(cfg: &'a RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(&cfg.out_dir).map_err(|e| CliError::io(&cfg.out_dir, e))?;
        Ok(OutputSet {
            cfg,
            hash: cfg.hash(),
            started: unix_now(),
            files: Vec::new(),
        })
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.cfg.out_dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.files.push((path, sha256_hex(bytes)));
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<(), CliError> {
        let env = Envelope {
            tool: TOOL,
            version: VERSION,
            command: self.cfg.command.name(),
            config_hash: &self.hash,
            seed: self.cfg.min.seed,
            config: self.cfg,
            result,
        };
        let mut bytes = serde_json::to_vec_pretty(&env).map_err(|e| CliError::Config(e.to_string()))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// CSV with a `#`-prefixed provenance line before the header.
    pub fn csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> Result<(), CliError> {
        let mut bytes = format!(
            "# {TOOL} {VERSION} command={} config_sha256={} seed={}\n",
            self.cfg.command.name(),
            self.hash,
            self.cfg.min.seed
        )
        .into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut bytes);
            for r in rows {
                w.serialize(r).map_err(|e| CliError::Config(e.to_string()))?;
            }
            w.flush().map_err(|e| CliError::io(Path::new(name), e))?;
        }
        self.write(name, &bytes)
    }

    /// Writes `manifest.json` and returns every path written.
    pub fn finish(self, exit_code: i32) -> Result<Vec<PathBuf>, CliError> {
        let finished = unix_now();
        let manifest = Manifest {
            tool: TOOL,
            version: VERSION,
            command: self.cfg.command.name(),
            config_hash: &self.hash,
            seed: self.cfg.min.seed,
            started_unix: self.started,
            finished_unix: finished,
            elapsed_secs: finished - self.started,
            workers: rayon::current_num_threads(),
            exit_code,
            files: self
                .files
                .iter()
                .map(|(p, h)| FileEntry {
                    name: p.file_name().unwrap_or_default().to_string_lossy().into_owned(),
                    sha256: h.clone(),
                })
                .collect(),
        };
        let path = self.cfg.out_dir.join("manifest.json");
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Config(e.to_string()))?;
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        let mut paths: Vec<PathBuf> = self.files.into_iter().map(|(p, _)| p).collect();
        paths.push(path);
        Ok(paths)
    }
}
