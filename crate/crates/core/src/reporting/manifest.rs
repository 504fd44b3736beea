//! Append-only run directories with hashed outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the run directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub pipeline: String,
    pub config: serde_json::Value,
    pub master_seed: u64,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    pub wall_time_secs: f64,
    pub outputs: Vec<OutputFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub entries: Vec<ManifestEntry>,
}

impl Default for Manifest {
    fn default() -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            entries: Vec::new(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// A run directory and its manifest.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    manifest: Manifest,
}

impl RunDir {
    /// Opens (creating if needed) and verifies every recorded output hash.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        let path = root.join(MANIFEST_FILE);
        let manifest = if path.exists() {
            serde_json::from_slice(&fs::read(&path)?)?
        } else {
            Manifest::default()
        };
        let run = Self { root, manifest };
        run.verify()?;
        Ok(run)
    }

    /// Opens an existing run without creating anything.
    pub fn open_existing(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        if !root.join(MANIFEST_FILE).exists() {
            return Err(Error::MissingRecords(format!("manifest in {}", root.display())));
        }
        Self::open(root)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn verify(&self) -> Result<()> {
        for e in &self.manifest.entries {
            for o in &e.outputs {
                self.read_output(o)?;
            }
        }
        Ok(())
    }

    /// Reads a listed output, failing if its bytes changed since it was written.
    pub fn read_output(&self, out: &OutputFile) -> Result<Vec<u8>> {
        let full = self.root.join(&out.path);
        let bytes = fs::read(&full).map_err(|_| Error::HashMismatch(format!("{} is missing", out.path)))?;
        if sha256_hex(&bytes) != out.sha256 {
            return Err(Error::HashMismatch(out.path.clone()));
        }
        Ok(bytes)
    }

    /// Starts a new entry; nothing touches the manifest until [`EntryWriter::finish`].
    pub fn begin(&mut self, pipeline: &str, config: serde_json::Value, master_seed: u64) -> EntryWriter<'_> {
        let index = self.manifest.entries.len();
        EntryWriter {
            entry: ManifestEntry {
                index,
                pipeline: pipeline.to_string(),
                config,
                master_seed,
                started: unix_now(),
                finished: 0.0,
                wall_time_secs: 0.0,
                outputs: Vec::new(),
            },
            clock: Instant::now(),
            run: self,
        }
    }

    fn save(&self) -> Result<()> {
        let tmp = self.root.join(format!("{MANIFEST_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_vec_pretty(&self.manifest)?)?;
        fs::rename(tmp, self.root.join(MANIFEST_FILE))?;
        Ok(())
    }
}

/// Collects the outputs of one pipeline invocation.
#[derive(Debug)]
pub struct EntryWriter<'a> {
    run: &'a mut RunDir,
    entry: ManifestEntry,
    clock: Instant,
}

impl EntryWriter<'_> {
    pub fn index(&self) -> usize {
        self.entry.index
    }

    /// Writes `{index}-{name}`, refusing to overwrite anything.
    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let rel = format!("{:03}-{name}", self.entry.index);
        let full = self.run.root.join(&rel);
        if let Some(dir) = full.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut f = fs::OpenOptions::new().write(true).create_new(true).open(&full)?;
        std::io::Write::write_all(&mut f, bytes)?;
        self.entry.outputs.push(OutputFile {
            path: rel,
            sha256: sha256_hex(bytes),
        });
        Ok(full)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    pub fn finish(mut self) -> Result<ManifestEntry> {
        self.entry.finished = unix_now();
        self.entry.wall_time_secs = self.clock.elapsed().as_secs_f64();
        self.run.manifest.entries.push(self.entry.clone());
        self.run.save()?;
        Ok(self.entry)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn append_only_and_hash_checked() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = RunDir::open(dir.path()).unwrap();
        let mut w = run.begin("moment", serde_json::json!({"a": 1}), 7);
        w.write_bytes("x.csv", b"1,2\n").unwrap();
        assert!(w.write_bytes("x.csv", b"again").is_err());
        w.finish().unwrap();
        let mut w = run.begin("moment", serde_json::json!({}), 8);
        w.write_bytes("x.csv", b"3,4\n").unwrap();
        w.finish().unwrap();

        let run = RunDir::open(dir.path()).unwrap();
        assert_eq!(run.manifest().entries.len(), 2);
        assert_eq!(run.manifest().entries[1].outputs[0].path, "001-x.csv");

        fs::write(dir.path().join("000-x.csv"), b"tampered").unwrap();
        assert!(matches!(RunDir::open(dir.path()), Err(Error::HashMismatch(_))));
    }

    #[test]
    fn open_existing_requires_manifest() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(RunDir::open_existing(dir.path()), Err(Error::MissingRecords(_))));
    }
}
