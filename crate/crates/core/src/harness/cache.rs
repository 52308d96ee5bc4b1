//! Content-addressed response cache: one JSON document per request
//! fingerprint, stored at `<dir>/<fp[..2]>/<fp>.json`.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::backend::{CompletionRequest, Usage};

/// SHA-256 hex of the request's canonical JSON (model, messages,
/// temperature, max_tokens, in that order).
pub fn fingerprint(request: &CompletionRequest) -> String {
    let canonical = serde_json::to_vec(request).expect("requests serialize");
    hex::encode(Sha256::digest(&canonical))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub fingerprint: String,
    pub request: CompletionRequest,
    pub raw: String,
    pub usage: Option<Usage>,
}

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache entry {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("cache io at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ResponseCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, fingerprint: &str) -> PathBuf {
        let shard = fingerprint.get(..2).unwrap_or("__");
        self.dir.join(shard).join(format!("{fingerprint}.json"))
    }

    /// Look up `fingerprint`. A file that fails to parse, or whose stored
    /// fingerprint or request does not hash to the key, is an error rather
    /// than a miss.
    pub fn get(&self, fingerprint: &str) -> Result<Option<CacheEntry>, CacheError> {
        let path = self.path_for(fingerprint);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(source) => return Err(CacheError::Io { path, source }),
        };
        let corrupt = |reason: String| CacheError::Corrupt {
            path: path.clone(),
            reason,
        };
        let entry: CacheEntry = serde_json::from_slice(&bytes).map_err(|e| corrupt(e.to_string()))?;
        if entry.fingerprint != fingerprint {
            return Err(corrupt(format!("stored fingerprint {}", entry.fingerprint)));
        }
        let recomputed = self::fingerprint(&entry.request);
        if recomputed != fingerprint {
            return Err(corrupt(format!("stored request hashes to {recomputed}")));
        }
        Ok(Some(entry))
    }

    /// Write `entry` atomically (temp file in the same directory, then
    /// rename), so concurrent writers of one fingerprint never expose a
    /// partial file.
    pub fn put(&self, entry: &CacheEntry) -> Result<(), CacheError> {
        let path = self.path_for(&entry.fingerprint);
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CacheError::Io { path, source }
        };
        let parent = path.parent().expect("cache path has a shard directory");
        fs::create_dir_all(parent).map_err(io_err(parent))?;
        let tmp = parent.join(format!(
            ".{}.{}.{}.tmp",
            entry.fingerprint,
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let mut file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        let json = serde_json::to_vec_pretty(entry).expect("cache entries serialize");
        file.write_all(&json).map_err(io_err(&tmp))?;
        file.sync_all().map_err(io_err(&tmp))?;
        drop(file);
        fs::rename(&tmp, &path).map_err(io_err(&path))
    }
}
