//! Output directory bookkeeping and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Format;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

pub struct Outputs {
    dir: PathBuf,
    only: Option<Format>,
    pub files: Vec<FileEntry>,
}

impl Outputs {
    pub fn new(dir: &Path, only: Option<Format>) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), only, files: Vec::new() })
    }

    pub fn wants(&self, f: Format) -> bool {
        self.only.is_none_or(|o| o == f)
    }

    /// Write `content` to `name` unless the format filter excludes it.
    pub fn write(&mut self, name: &str, format: Format, content: &str) -> Result<()> {
        if !self.wants(format) {
            return Ok(());
        }
        let path = self.dir.join(name);
        fs::write(&path, content).with_context(|| format!("cannot write {}", path.display()))?;
        self.files.push(FileEntry { path: name.to_string(), sha256: sha256_hex(content.as_bytes()), bytes: content.len() });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, Format::Json, &text)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

#[derive(Serialize)]
pub struct InputEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema_version: u32,
    pub command: &'static str,
    pub seed: Option<u64>,
    pub config: &'a topolattice::io::RunConfig,
    pub inputs: Vec<InputEntry>,
    pub outputs: &'a [FileEntry],
    pub warnings: &'a [String],
    pub integrator: Vec<serde_json::Value>,
    pub wall_clock_seconds: f64,
}

pub fn write_manifest(dir: &Path, m: &Manifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(m)?;
    text.push('\n');
    let path = dir.join("manifest.json");
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
}
