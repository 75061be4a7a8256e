//! Content-addressed store for encoded streams and their metric scores.

use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::SystemTime;

use md5::Md5;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fsutil::atomic_write;

fn hash_file<D: Digest>(path: &Path) -> Result<String> {
    let mut f =
        std::fs::File::open(path).map_err(|e| Error::io(format!("open {}", path.display()), e))?;
    let mut h = D::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = f
            .read(&mut buf)
            .map_err(|e| Error::io(format!("read {}", path.display()), e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Hex MD5 of a file.
pub fn md5_file(path: &Path) -> Result<String> {
    hash_file::<Md5>(path)
}

/// Hex SHA-256 of a file.
pub fn sha256_file(path: &Path) -> Result<String> {
    hash_file::<Sha256>(path)
}

/// SHA-256 over length-prefixed parts, so part boundaries cannot alias.
pub fn combine(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}

/// `combine(input digest, command, tool version)`
pub fn cache_key(input_digest: &str, command: &str, tool_version: &str) -> String {
    combine(&[input_digest, command, tool_version])
}

/// Input digests keyed by path, reused while size and mtime are unchanged.
#[derive(Debug, Default)]
pub struct DigestMemo {
    inner: Mutex<HashMap<PathBuf, (u64, Option<SystemTime>, String)>>,
}

impl DigestMemo {
    pub fn sha256(&self, path: &Path) -> Result<String> {
        let meta = std::fs::metadata(path)
            .map_err(|e| Error::io(format!("stat {}", path.display()), e))?;
        let stamp = (meta.len(), meta.modified().ok());
        if let Some((len, mtime, d)) = self.inner.lock().unwrap().get(path) {
            if (*len, *mtime) == stamp {
                return Ok(d.clone());
            }
        }
        let d = sha256_file(path)?;
        self.inner
            .lock()
            .unwrap()
            .insert(path.to_path_buf(), (stamp.0, stamp.1, d.clone()));
        Ok(d)
    }
}

/// Directory of `<key>.mp4` streams plus `<key>.json` records. All writes go
/// through temp-file rename, so a crash never leaves a torn entry.
#[derive(Debug, Clone)]
pub struct Cache {
    root: PathBuf,
}

impl Cache {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)
            .map_err(|e| Error::io(format!("create {}", root.display()), e))?;
        let root = std::fs::canonicalize(&root)
            .map_err(|e| Error::io(format!("resolve {}", root.display()), e))?;
        Ok(Cache { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn stream_path(&self, key: &str) -> PathBuf {
        self.root.join(format!("{key}.mp4"))
    }

    fn record_path(&self, key: &str) -> PathBuf {
        self.root.join(format!("{key}.json"))
    }

    /// The stored record, if present and readable. Corrupt records count as
    /// misses.
    pub fn load<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        let bytes = std::fs::read(self.record_path(key)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    pub fn store<T: Serialize>(&self, key: &str, record: &T) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(record).map_err(|e| Error::Config(e.to_string()))?;
        atomic_write(&self.record_path(key), &bytes)
    }

    /// Moves a finished stream into the store.
    pub fn adopt_stream(&self, key: &str, file: tempfile::TempPath) -> Result<PathBuf> {
        let dest = self.stream_path(key);
        file.persist(&dest)
            .map_err(|e| Error::io(format!("rename into {}", dest.display()), e.error))?;
        Ok(dest)
    }

    /// A temp path inside the store, on the same filesystem as the entries.
    pub fn scratch(&self, suffix: &str) -> Result<tempfile::TempPath> {
        tempfile::Builder::new()
            .prefix(".partial-")
            .suffix(suffix)
            .tempfile_in(&self.root)
            .map(|f| f.into_temp_path())
            .map_err(|e| Error::io(format!("temp file in {}", self.root.display()), e))
    }
}
