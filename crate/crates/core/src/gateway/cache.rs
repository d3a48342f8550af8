//! Content-addressed replay cache.
//!
//! Each entry lives in `<dir>/<sha256 hex>`: one JSON metadata line followed by
//! the raw response bytes. Entries are never rewritten once present.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::EndpointKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryHeader {
    pub kind: EndpointKind,
    pub model_name: String,
    pub path: String,
    pub created_at: u64,
}

#[derive(Debug, Clone)]
pub struct CacheEntry {
    pub key: String,
    pub header: EntryHeader,
    pub value: Arc<Vec<u8>>,
}

/// Serializes JSON with object keys sorted at every level.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(v, out);
            }
            out.push(']');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

/// Cache key over (kind, model, path, canonicalized request).
pub fn cache_key(kind: EndpointKind, model_name: &str, path: &str, request: &Value) -> String {
    let mut h = Sha256::new();
    h.update(kind.as_str().as_bytes());
    h.update([0]);
    h.update(model_name.as_bytes());
    h.update([0]);
    h.update(path.as_bytes());
    h.update([0]);
    h.update(canonical_json(request).as_bytes());
    hex::encode(h.finalize())
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Default)]
pub struct ReplayCache {
    dir: Option<PathBuf>,
    mem: RwLock<HashMap<String, CacheEntry>>,
    write_lock: Mutex<()>,
}

impl ReplayCache {
    pub fn in_memory() -> Self {
        ReplayCache::default()
    }

    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(ReplayCache {
            dir: Some(dir),
            ..Default::default()
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn get(&self, key: &str) -> Result<Option<CacheEntry>> {
        if let Some(e) = self.mem.read().unwrap().get(key) {
            return Ok(Some(e.clone()));
        }
        let Some(dir) = &self.dir else {
            return Ok(None);
        };
        let path = dir.join(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let entry = parse_entry(key, &bytes).ok_or_else(|| {
            Error::io(
                &path,
                std::io::Error::new(std::io::ErrorKind::InvalidData, "corrupt cache entry"),
            )
        })?;
        self.mem
            .write()
            .unwrap()
            .insert(key.to_owned(), entry.clone());
        Ok(Some(entry))
    }

    /// Stores `value` under `key` unless an entry already exists.
    pub fn put(&self, key: &str, header: EntryHeader, value: Vec<u8>) -> Result<CacheEntry> {
        let _guard = self.write_lock.lock().unwrap();
        if let Some(existing) = self.get(key)? {
            return Ok(existing);
        }
        let entry = CacheEntry {
            key: key.to_owned(),
            header,
            value: Arc::new(value),
        };
        if let Some(dir) = &self.dir {
            let mut buf = serde_json::to_vec(&entry.header)?;
            buf.push(b'\n');
            buf.extend_from_slice(&entry.value);
            let tmp = dir.join(format!(".{key}.tmp"));
            let dst = dir.join(key);
            let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
            f.write_all(&buf).map_err(|e| Error::io(&tmp, e))?;
            drop(f);
            fs::rename(&tmp, &dst).map_err(|e| Error::io(&dst, e))?;
        }
        self.mem
            .write()
            .unwrap()
            .insert(key.to_owned(), entry.clone());
        Ok(entry)
    }

    /// All entries, from disk when the cache is directory-backed.
    pub fn entries(&self) -> Result<Vec<CacheEntry>> {
        let mut out = Vec::new();
        match &self.dir {
            Some(dir) => {
                let rd = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
                for item in rd {
                    let item = item.map_err(|e| Error::io(dir, e))?;
                    let name = item.file_name().to_string_lossy().into_owned();
                    if name.starts_with('.') {
                        continue;
                    }
                    if let Some(e) = self.get(&name)? {
                        out.push(e);
                    }
                }
            }
            None => out.extend(self.mem.read().unwrap().values().cloned()),
        }
        out.sort_by(|a, b| a.key.cmp(&b.key));
        Ok(out)
    }
}

pub(crate) fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn parse_entry(key: &str, bytes: &[u8]) -> Option<CacheEntry> {
    let nl = bytes.iter().position(|&b| b == b'\n')?;
    let header: EntryHeader = serde_json::from_slice(&bytes[..nl]).ok()?;
    Some(CacheEntry {
        key: key.to_owned(),
        header,
        value: Arc::new(bytes[nl + 1..].to_vec()),
    })
}
