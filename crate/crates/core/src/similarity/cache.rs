use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Keyed score store for provider similarities. Keys are the hex SHA-256 of
/// `(backend, a, b)`; identical keys always carry identical values, so
/// concurrent writers may race freely (last write wins).
#[derive(Debug, Default)]
pub struct SimilarityCache {
    entries: RwLock<HashMap<String, f64>>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    score: f64,
}

impl SimilarityCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn key(backend: &str, a: &str, b: &str) -> String {
        let mut h = Sha256::new();
        for part in [backend, a, b] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.read().expect("cache lock").get(key).copied()
    }

    pub fn insert(&self, key: String, score: f64) {
        self.entries.write().expect("cache lock").insert(key, score);
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Loads a store written by [`SimilarityCache::save`]. A missing file is
    /// an empty cache.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let cache = Self::new();
        if !path.exists() {
            return Ok(cache);
        }
        let reader = BufReader::new(File::open(path)?);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: Entry = serde_json::from_str(&line).map_err(|err| Error::MalformedJson {
                line: i + 1,
                message: format!("{}: {err}", path.display()),
            })?;
            cache.insert(e.key, e.score);
        }
        Ok(cache)
    }

    /// Writes all entries sorted by key, one JSON object per line.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let sorted: BTreeMap<String, f64> = self
            .entries
            .read()
            .expect("cache lock")
            .iter()
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        let mut out = BufWriter::new(File::create(path)?);
        for (key, score) in sorted {
            serde_json::to_writer(&mut out, &Entry { key, score }).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }
}
