//! Dataset manifests: one JSON object per line, `{"path", "subject", "label"}`.
//! Relative paths resolve against the manifest's directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub subject: String,
    /// Class index or a real-valued target such as an age.
    pub label: f64,
}

impl ManifestEntry {
    pub fn class(&self) -> Result<usize> {
        if self.label >= 0.0 && self.label.fract() == 0.0 && self.label < u32::MAX as f64 {
            Ok(self.label as usize)
        } else {
            Err(Error::InvalidParam(format!("label {} of {} is not a class index", self.label, self.path)))
        }
    }
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let e: ManifestEntry = serde_json::from_str(line)
            .map_err(|err| Error::Format(format!("manifest line {}: {err}", i + 1)))?;
        if e.subject.is_empty() {
            return Err(Error::Format(format!("manifest line {}: empty subject", i + 1)));
        }
        out.push(e);
    }
    Ok(out)
}

/// Read a manifest and resolve each path. Returns `(resolved path, entry)`.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<(PathBuf, ManifestEntry)>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let entries = parse_manifest(&fs::read_to_string(path)?)?;
    Ok(entries
        .into_iter()
        .map(|e| {
            let p = Path::new(&e.path);
            let resolved = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
            (resolved, e)
        })
        .collect())
}

pub fn write_manifest(w: &mut impl Write, entries: &[ManifestEntry]) -> Result<()> {
    for e in entries {
        serde_json::to_writer(&mut *w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
