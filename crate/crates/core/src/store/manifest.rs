use std::collections::BTreeMap;
use std::fs;
use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use super::emb1::read_header;
use crate::{Error, Result};

/// Sidecar JSON describing a set of `EMB1` files.
///
/// `files` maps a split name (`train`, `test`, ...) to a path relative to the
/// manifest; `checksums` maps the same relative paths to 16-digit FNV-1a 64
/// hex digests of the file contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset_name: String,
    pub backbone_id: String,
    pub pooling_descriptor: String,
    pub dim: u32,
    pub files: BTreeMap<String, String>,
    pub row_counts: BTreeMap<String, u64>,
    pub checksums: BTreeMap<String, String>,
    /// Producer notes (transform string, skipped-image counts, ...).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, serde_json::Value>,
}

/// FNV-1a 64 digest of a file, as 16 lowercase hex digits.
pub fn file_checksum(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = FnvHasher::default();
    hasher.write(&bytes);
    Ok(format!("{:016x}", hasher.finish()))
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Checks dimensions, row counts and checksums against the files on disk.
    /// Relative paths resolve against `base_dir`. Returns one message per problem.
    pub fn verify(&self, base_dir: impl AsRef<Path>) -> Result<Vec<String>> {
        let base = base_dir.as_ref();
        let mut problems = Vec::new();
        for (split, file) in &self.files {
            let header = read_header(base.join(file))?;
            if header.n_cols != self.dim {
                problems.push(format!(
                    "{split}: {file} has {} columns, manifest says {}",
                    header.n_cols, self.dim
                ));
            }
            match self.row_counts.get(split) {
                Some(&rows) if rows != header.n_rows as u64 => problems.push(format!(
                    "{split}: {file} has {} rows, manifest says {rows}",
                    header.n_rows
                )),
                None => problems.push(format!("{split}: no row count recorded")),
                _ => {}
            }
            if !self.checksums.contains_key(file) {
                problems.push(format!("{split}: no checksum recorded for {file}"));
            }
        }
        for (file, expected) in &self.checksums {
            let actual = file_checksum(base.join(file))?;
            if !actual.eq_ignore_ascii_case(expected) {
                problems.push(format!("{file}: checksum {actual} does not match {expected}"));
            }
        }
        Ok(problems)
    }
}
