//! Content-addressed response cache: one JSON file per request fingerprint.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::error::{Error, Result};

/// Hex SHA-256 over the length-prefixed request fields.
pub fn fingerprint(
    system_text: &str,
    raw: &str,
    model: &str,
    temperature: f64,
    sample: u32,
) -> String {
    let mut h = Sha256::new();
    for field in [system_text.as_bytes(), raw.as_bytes(), model.as_bytes()] {
        h.update((field.len() as u64).to_le_bytes());
        h.update(field);
    }
    h.update(temperature.to_bits().to_le_bytes());
    h.update(sample.to_le_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub fingerprint: String,
    pub model: String,
    pub temperature: f64,
    pub sample: u32,
    pub system_text: String,
    pub user_text: String,
    pub response: String,
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(ResponseCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, fingerprint: &str) -> PathBuf {
        self.dir.join(format!("{fingerprint}.json"))
    }

    /// Unreadable or mismatching entries count as misses.
    pub fn get(&self, fingerprint: &str) -> Option<CacheEntry> {
        let bytes = fs::read(self.path(fingerprint)).ok()?;
        let entry: CacheEntry = serde_json::from_slice(&bytes).ok()?;
        (entry.fingerprint == fingerprint).then_some(entry)
    }

    /// Written to a temporary file and renamed into place, so concurrent
    /// readers never observe a partial entry.
    pub fn put(&self, entry: &CacheEntry) -> Result<()> {
        let target = self.path(&entry.fingerprint);
        let mut tmp = NamedTempFile::new_in(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        serde_json::to_writer_pretty(&mut tmp, entry)?;
        tmp.flush().map_err(|e| Error::io(tmp.path(), e))?;
        tmp.persist(&target)
            .map_err(|e| Error::io(&target, e.error))?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        fs::read_dir(&self.dir)
            .map(|rd| {
                rd.filter_map(|e| e.ok())
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
