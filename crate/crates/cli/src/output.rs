//! Output directory staging and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

/// Writes go to `<out>.partial`; the directory is renamed to `<out>` only
/// after the manifest is written, and removed if the run fails.
pub struct Staging {
    target: PathBuf,
    partial: PathBuf,
    artifacts: Vec<String>,
    done: bool,
}

impl Staging {
    pub fn new(target: &Path) -> Result<Self> {
        if target.exists() && !target.join(MANIFEST).exists() {
            bail!(
                "output directory {} exists and is not a previous run (no {MANIFEST}); refusing to replace it",
                target.display()
            );
        }
        let mut name = target.as_os_str().to_owned();
        name.push(".partial");
        let partial = PathBuf::from(name);
        if partial.exists() {
            fs::remove_dir_all(&partial).with_context(|| format!("removing stale {}", partial.display()))?;
        }
        fs::create_dir_all(&partial).with_context(|| format!("creating {}", partial.display()))?;
        Ok(Self {
            target: target.to_path_buf(),
            partial,
            artifacts: Vec::new(),
            done: false,
        })
    }

    /// Path for a new artifact, registered for hashing in the manifest.
    pub fn path(&mut self, name: &str) -> PathBuf {
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.to_string());
        }
        self.partial.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))
    }

    pub fn create(&mut self, name: &str) -> Result<std::io::BufWriter<fs::File>> {
        let p = self.path(name);
        let f = fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
        Ok(std::io::BufWriter::new(f))
    }

    /// Hash the artifacts, write the manifest and move the directory into place.
    pub fn finish(mut self, mut manifest: Manifest) -> Result<PathBuf> {
        let mut names = self.artifacts.clone();
        names.sort();
        for name in names {
            let bytes = fs::read(self.partial.join(&name))?;
            manifest.artifacts.push(Artifact {
                sha256: hex::encode(Sha256::digest(&bytes)),
                bytes: bytes.len(),
                name,
            });
        }
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(self.partial.join(MANIFEST), text + "\n")?;
        if self.target.exists() {
            fs::remove_dir_all(&self.target).with_context(|| format!("replacing {}", self.target.display()))?;
        }
        fs::rename(&self.partial, &self.target)
            .with_context(|| format!("moving results to {}", self.target.display()))?;
        self.done = true;
        Ok(self.target.clone())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.done {
            let _ = fs::remove_dir_all(&self.partial);
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub stage: String,
    pub millis: f64,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub subcommand: String,
    pub seed: u64,
    pub threads: usize,
    pub overrides: Vec<String>,
    pub config_sha256: String,
    pub config: String,
    pub grid_signature: String,
    pub summary: serde_json::Value,
    pub artifacts: Vec<Artifact>,
    pub timings: Vec<Timing>,
}

/// Wall-clock stage timer; timings go to the manifest only.
#[derive(Default)]
pub struct Timings {
    pub entries: Vec<Timing>,
}

impl Timings {
    pub fn run<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.entries.push(Timing {
            stage: stage.to_string(),
            millis: start.elapsed().as_secs_f64() * 1e3,
        });
        out
    }
}
