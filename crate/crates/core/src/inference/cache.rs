use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::sha256_hex;

/// One line of a generation cache file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationCacheEntry {
    pub key: String,
    pub backend_id: String,
    pub source_hash: String,
    pub raw: String,
    #[serde(default)]
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CachedGeneration {
    pub raw: String,
    pub latency_ms: u64,
}

pub fn generation_key(source: &str, backend_id: &str) -> String {
    sha256_hex(format!("{backend_id}:{}", sha256_hex(source)))
}

/// Raw generations keyed by (source, backend id). Later lines win.
pub struct GenerationCache {
    entries: RwLock<HashMap<String, CachedGeneration>>,
    writer: Option<Mutex<BufWriter<File>>>,
    path: Option<PathBuf>,
}

impl GenerationCache {
    pub fn in_memory() -> Self {
        Self {
            entries: RwLock::new(HashMap::new()),
            writer: None,
            path: None,
        }
    }

    /// Loads an existing cache file (if any) and appends new entries to it.
    pub fn open(path: &Path) -> Result<Self> {
        let entries = if path.exists() {
            read_entries(path)?
        } else {
            HashMap::new()
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::input(path, e))?;
        Ok(Self {
            entries: RwLock::new(entries),
            writer: Some(Mutex::new(BufWriter::new(file))),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn open_read_only(path: &Path) -> Result<Self> {
        Ok(Self {
            entries: RwLock::new(read_entries(path)?),
            writer: None,
            path: Some(path.to_path_buf()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, source: &str, backend_id: &str) -> Option<CachedGeneration> {
        self.entries
            .read()
            .expect("cache lock")
            .get(&generation_key(source, backend_id))
            .cloned()
    }

    pub fn insert(&self, source: &str, backend_id: &str, value: CachedGeneration) -> Result<()> {
        let entry = GenerationCacheEntry {
            key: generation_key(source, backend_id),
            backend_id: backend_id.to_string(),
            source_hash: sha256_hex(source),
            raw: value.raw.clone(),
            latency_ms: value.latency_ms,
        };
        if let Some(w) = &self.writer {
            let mut w = w.lock().expect("cache writer lock");
            serde_json::to_writer(&mut *w, &entry)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        self.entries
            .write()
            .expect("cache lock")
            .insert(entry.key, value);
        Ok(())
    }
}

fn read_entries(path: &Path) -> Result<HashMap<String, CachedGeneration>> {
    let file = File::open(path).map_err(|e| Error::input(path, e))?;
    let mut out = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: GenerationCacheEntry = serde_json::from_str(&line)
            .map_err(|err| Error::record(path, i + 1, "<record>", err.to_string()))?;
        out.insert(
            e.key,
            CachedGeneration {
                raw: e.raw,
                latency_ms: e.latency_ms,
            },
        );
    }
    Ok(out)
}
