use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::nli::{NliBackend, NliLabel, NliVerdict};
use crate::error::{BackendError, Error, Result};
use crate::text::{nfc, sha256_hex};

/// One line of the verdict cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub premise_hash: String,
    pub hypothesis_hash: String,
    pub label: NliLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<[f64; 3]>,
}

impl CacheEntry {
    pub fn new(premise: &str, hypothesis: &str, verdict: NliVerdict) -> Self {
        let premise_hash = sha256_hex(nfc(premise));
        let hypothesis_hash = sha256_hex(nfc(hypothesis));
        Self {
            key: pair_key(&premise_hash, &hypothesis_hash),
            premise_hash,
            hypothesis_hash,
            label: verdict.label,
            scores: verdict.scores,
        }
    }

    pub fn verdict(&self) -> NliVerdict {
        NliVerdict {
            label: self.label,
            scores: self.scores,
        }
    }
}

fn pair_key(premise_hash: &str, hypothesis_hash: &str) -> String {
    sha256_hex(format!("{premise_hash}:{hypothesis_hash}"))
}

/// Cache key for a (premise, hypothesis) pair, computed after NFC normalization.
pub fn verdict_key(premise: &str, hypothesis: &str) -> String {
    pair_key(&sha256_hex(nfc(premise)), &sha256_hex(nfc(hypothesis)))
}

/// NLI verdicts keyed by (premise, hypothesis).
///
/// Reads take a shared lock; inserts are serialized and, for file-backed
/// caches opened writable, appended to the file immediately.
pub struct VerdictCache {
    entries: RwLock<HashMap<String, NliVerdict>>,
    writer: Option<Mutex<BufWriter<File>>>,
    path: Option<PathBuf>,
}

impl VerdictCache {
    pub fn in_memory() -> Self {
        Self {
            entries: RwLock::new(HashMap::new()),
            writer: None,
            path: None,
        }
    }

    /// Loads a cache file without ever writing to it. A missing file is an error.
    pub fn open_read_only(path: &Path) -> Result<Self> {
        let entries = read_entries(path)?;
        Ok(Self {
            entries: RwLock::new(entries),
            writer: None,
            path: Some(path.to_path_buf()),
        })
    }

    /// Loads a cache file if present and appends new verdicts to it.
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

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, premise: &str, hypothesis: &str) -> Option<NliVerdict> {
        self.entries
            .read()
            .expect("cache lock")
            .get(&verdict_key(premise, hypothesis))
            .copied()
    }

    pub fn insert(&self, premise: &str, hypothesis: &str, verdict: NliVerdict) -> Result<()> {
        let entry = CacheEntry::new(premise, hypothesis, verdict);
        if let Some(w) = &self.writer {
            let mut w = w.lock().expect("cache writer lock");
            serde_json::to_writer(&mut *w, &entry)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        self.entries
            .write()
            .expect("cache lock")
            .insert(entry.key, verdict);
        Ok(())
    }
}

fn read_entries(path: &Path) -> Result<HashMap<String, NliVerdict>> {
    let file = File::open(path).map_err(|e| Error::input(path, e))?;
    let mut out = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: CacheEntry = serde_json::from_str(&line)
            .map_err(|e| Error::record(path, i + 1, "<record>", e.to_string()))?;
        let verdict = entry.verdict();
        verdict
            .validate()
            .map_err(|e| Error::record(path, i + 1, "scores", e.to_string()))?;
        out.insert(entry.key, verdict);
    }
    Ok(out)
}

/// A cache used directly as a backend: misses fail with [`BackendError::CacheMiss`].
impl NliBackend for VerdictCache {
    fn infer(&self, premise: &str, hypothesis: &str) -> std::result::Result<NliVerdict, BackendError> {
        self.get(premise, hypothesis).ok_or(BackendError::CacheMiss)
    }
}

/// Cache-first wrapper: hits never reach `inner`, misses are stored.
pub struct CachedNli<B> {
    cache: VerdictCache,
    inner: Option<B>,
    backend_calls: AtomicUsize,
}

impl<B: NliBackend> CachedNli<B> {
    pub fn new(cache: VerdictCache, inner: B) -> Self {
        Self {
            cache,
            inner: Some(inner),
            backend_calls: AtomicUsize::new(0),
        }
    }

    pub fn offline(cache: VerdictCache) -> Self {
        Self {
            cache,
            inner: None,
            backend_calls: AtomicUsize::new(0),
        }
    }

    /// Calls that went past the cache to the live backend.
    pub fn backend_calls(&self) -> usize {
        self.backend_calls.load(Ordering::SeqCst)
    }

    pub fn cache(&self) -> &VerdictCache {
        &self.cache
    }
}

impl<B: NliBackend> NliBackend for CachedNli<B> {
    fn infer(&self, premise: &str, hypothesis: &str) -> std::result::Result<NliVerdict, BackendError> {
        if let Some(v) = self.cache.get(premise, hypothesis) {
            return Ok(v);
        }
        let inner = self.inner.as_ref().ok_or(BackendError::CacheMiss)?;
        self.backend_calls.fetch_add(1, Ordering::SeqCst);
        let v = inner.infer(premise, hypothesis)?;
        self.cache
            .insert(premise, hypothesis, v)
            .map_err(|e| BackendError::Transport(format!("cache write failed: {e}")))?;
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Always(NliLabel);

    impl NliBackend for Always {
        fn infer(&self, _: &str, _: &str) -> std::result::Result<NliVerdict, BackendError> {
            Ok(NliVerdict::label(self.0))
        }
    }

    #[test]
    fn key_is_normalization_stable() {
        assert_eq!(verdict_key("caf\u{e9}", "x"), verdict_key("cafe\u{301}", "x"));
        assert_ne!(verdict_key("a", "b"), verdict_key("b", "a"));
    }

    #[test]
    fn file_cache_persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nli.jsonl");
        {
            let c = CachedNli::new(VerdictCache::open(&p).unwrap(), Always(NliLabel::Entail));
            assert!(c.infer("p", "h").unwrap().is_entail());
            assert!(c.infer("p", "h").unwrap().is_entail());
            assert_eq!(c.backend_calls(), 1);
        }
        let warm = CachedNli::new(VerdictCache::open(&p).unwrap(), Always(NliLabel::Neutral));
        assert!(warm.infer("p", "h").unwrap().is_entail());
        assert_eq!(warm.backend_calls(), 0);
        let ro = VerdictCache::open_read_only(&p).unwrap();
        assert_eq!(ro.len(), 1);
        assert_eq!(ro.infer("other", "h"), Err(BackendError::CacheMiss));
    }

    #[test]
    fn offline_miss() {
        let c: CachedNli<Always> = CachedNli::offline(VerdictCache::in_memory());
        assert_eq!(c.infer("p", "h"), Err(BackendError::CacheMiss));
    }

    #[test]
    fn corrupt_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nli.jsonl");
        std::fs::write(&p, "{\"key\":1}\n").unwrap();
        assert!(matches!(
            VerdictCache::open_read_only(&p),
            Err(Error::Record { line: 1, .. })
        ));
    }
}
