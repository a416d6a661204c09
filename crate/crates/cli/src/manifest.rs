use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Record of one command run. Every file the run wrote is listed with its
/// digest; timings are the only nondeterministic content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub version: String,
    pub out_dir: PathBuf,
    pub phase_seconds: BTreeMap<String, f64>,
    pub artifacts: Vec<ArtifactEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects artifacts and timings while a command runs.
pub struct Recorder {
    manifest: RunManifest,
    clock: Instant,
}

impl Recorder {
    pub fn new(command: &str, config: Option<&Path>, seed: Option<u64>, out: &Path) -> CliResult<Self> {
        fs::create_dir_all(out).map_err(|e| CliError::io(out.display(), e))?;
        Ok(Self {
            manifest: RunManifest {
                command: command.into(),
                config: config.map(Path::to_path_buf),
                seed,
                version: env!("CARGO_PKG_VERSION").into(),
                out_dir: out.to_path_buf(),
                phase_seconds: BTreeMap::new(),
                artifacts: Vec::new(),
                failures: Vec::new(),
            },
            clock: Instant::now(),
        })
    }

    /// Ends the current phase.
    pub fn lap(&mut self, phase: &str) {
        self.manifest
            .phase_seconds
            .insert(phase.into(), self.clock.elapsed().as_secs_f64());
        self.clock = Instant::now();
    }

    /// Records phases timed elsewhere; they replace the current phase.
    pub fn add_phases(&mut self, phases: &BTreeMap<String, f64>) {
        self.manifest.phase_seconds.extend(phases.clone());
        self.clock = Instant::now();
    }

    pub fn fail(&mut self, message: impl Into<String>) {
        self.manifest.failures.push(message.into());
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.manifest.out_dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(path.display(), e))?;
        self.manifest.artifacts.push(ArtifactEntry {
            path: name.into(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<RunManifest> {
        self.manifest.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        let path = self.manifest.out_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| CliError::io(path.display(), e))?;
        Ok(self.manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
