//! Output staging: files are collected in memory, written to a temporary
//! sibling directory and renamed into place only when the command succeeded.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(name: &str, bytes: &[u8]) -> Self {
        Self {
            name: name.to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// Refuses to clobber an existing non-empty directory.
pub fn check_target(out: &Path) -> Result<()> {
    if out.exists() {
        if !out.is_dir() {
            bail!("output path {} exists and is not a directory", out.display());
        }
        if std::fs::read_dir(out)?.next().is_some() {
            bail!("output directory {} is not empty", out.display());
        }
    }
    Ok(())
}

#[derive(Debug, Default)]
pub struct Staged {
    files: BTreeMap<String, Vec<u8>>,
}

impl Staged {
    pub fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.insert(name.into(), bytes.into());
    }

    /// Adds the manifest and moves everything into `out` atomically.
    pub fn commit(
        mut self,
        out: &Path,
        command: &str,
        config: serde_json::Value,
        seeds: BTreeMap<String, u64>,
        inputs: Vec<FileDigest>,
    ) -> Result<PathBuf> {
        check_target(out)?;
        let manifest = Manifest {
            tool: "crowdtrack",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config,
            seeds,
            inputs,
            outputs: self.files.iter().map(|(n, b)| FileDigest::of(n, b)).collect(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        self.add(MANIFEST, text);

        let parent = match out.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        std::fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
        let tmp = tempfile::Builder::new()
            .prefix(".crowdtrack-")
            .tempdir_in(&parent)
            .with_context(|| format!("creating staging directory in {}", parent.display()))?;
        for (name, bytes) in &self.files {
            std::fs::write(tmp.path().join(name), bytes).with_context(|| format!("writing {name}"))?;
        }
        if out.exists() {
            std::fs::remove_dir(out).with_context(|| format!("replacing empty {}", out.display()))?;
        }
        let staged = tmp.keep();
        if let Err(e) = std::fs::rename(&staged, out) {
            let _ = std::fs::remove_dir_all(&staged);
            return Err(e).with_context(|| format!("moving outputs into {}", out.display()));
        }
        Ok(out.to_path_buf())
    }
}

/// Reads an input file and records its digest under its file name.
pub fn read_input(path: &Path, inputs: &mut Vec<FileDigest>) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
    inputs.push(FileDigest::of(&name, &bytes));
    String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
}
