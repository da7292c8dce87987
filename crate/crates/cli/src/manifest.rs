use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Record of one invocation. It is written after every output file, so a
/// manifest on disk means the listed outputs are complete.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub dry_run: bool,
}

/// Collects outputs for one run and writes the manifest last.
pub struct Run {
    manifest: RunManifest,
    path: PathBuf,
}

impl Run {
    pub fn new(command: &str, config: serde_json::Value, seed: u64, manifest_path: PathBuf) -> Self {
        Self {
            manifest: RunManifest {
                command: command.to_string(),
                config,
                seed,
                version: env!("CARGO_PKG_VERSION").to_string(),
                outputs: Vec::new(),
                dry_run: false,
            },
            path: manifest_path,
        }
    }

    pub fn dry_run(mut self) -> Self {
        self.manifest.dry_run = true;
        self
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(path, bytes)?;
        self.manifest.outputs.push(path.display().to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, path: &Path, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(path, s.as_bytes())
    }

    pub fn finish(self) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(&self.manifest)?;
        s.push('\n');
        write_atomic(&self.path, s.as_bytes())?;
        for o in &self.manifest.outputs {
            println!("{o}");
        }
        println!("{}", self.path.display());
        Ok(())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| CliError::Usage(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(())
}
