//! Run directories: `<base>/<hash>/` holding `config.json`, the CSV and JSON
//! artifacts, `report.json` and a `MANIFEST` of SHA-256 digests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_BASE: &str = "runs";

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Run key from command, version and the effective configuration.
pub fn config_hash(command: &str, config_json: &str) -> String {
    let mut text = format!("{command}\n{VERSION}\n");
    text.push_str(config_json);
    digest(text.as_bytes())[..16].to_string()
}

/// Artifacts collected in memory and written in one go, so that a config
/// rejected during validation leaves no directory behind.
pub struct RunDir {
    command: String,
    hash: String,
    path: PathBuf,
    files: Vec<(String, Vec<u8>)>,
    started: Instant,
}

impl RunDir {
    pub fn new(base: &Path, command: &str, config_json: String) -> RunDir {
        let hash = config_hash(command, &config_json);
        RunDir {
            command: command.to_string(),
            path: base.join(&hash),
            hash,
            files: vec![("config.json".into(), (config_json + "\n").into_bytes())],
            started: Instant::now(),
        }
    }

    pub fn add(&mut self, name: &str, contents: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), contents.into()));
    }

    pub fn add_json(&mut self, name: &str, value: &Value) {
        let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
        text.push('\n');
        self.add(name, text);
    }

    /// Writes every artifact, `report.json` and `MANIFEST`.
    pub fn finish(mut self, summary: &Value, result: Value) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.path)?;
        let artifacts: Vec<&str> = self.files.iter().map(|(n, _)| n.as_str()).collect();
        let report = json!({
            "command": self.command,
            "version": VERSION,
            "config_hash": self.hash,
            "wall_clock_s": self.started.elapsed().as_secs_f64(),
            "artifacts": artifacts,
            "summary": summary,
            "result": result,
        });
        self.add_json("report.json", &report);
        let mut manifest = String::new();
        let mut names: Vec<&(String, Vec<u8>)> = self.files.iter().collect();
        names.sort_by(|a, b| a.0.cmp(&b.0));
        for (name, bytes) in names {
            fs::write(self.path.join(name), bytes)?;
            manifest.push_str(&format!("{}  {name}\n", digest(bytes)));
        }
        fs::write(self.path.join("MANIFEST"), manifest)?;
        Ok(self.path)
    }
}
