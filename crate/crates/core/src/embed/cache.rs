//! Persistent embedding cache keyed by provider identity and text hash.
//!
//! File layout: `SDQE`, version (u16 LE), dimension (u16 LE), then
//! fixed-size records of text key (32-byte SHA-256), provider id hash
//! (u64 LE), `dimension` f32 LE values and a CRC32 (u32 LE) over the
//! preceding record bytes.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use sha2::{Digest, Sha256};

use super::{EmbedError, EmbeddingProvider};
use crate::util::fnv1a64;

pub const CACHE_MAGIC: &[u8; 4] = b"SDQE";
pub const CACHE_VERSION: u16 = 1;
pub const CACHE_HEADER_BYTES: usize = 8;

pub fn record_bytes(dimension: usize) -> usize {
    32 + 8 + dimension * 4 + 4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub text: [u8; 32],
    pub provider: u64,
}

impl CacheKey {
    pub fn new(provider_id: &str, text: &str) -> Self {
        Self {
            text: Sha256::digest(text.as_bytes()).into(),
            provider: fnv1a64(provider_id.as_bytes()),
        }
    }
}

/// What `open` found on disk.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CacheLoadReport {
    pub loaded: usize,
    pub corrupt: usize,
    pub truncated_bytes: usize,
}

#[derive(Debug)]
pub struct EmbeddingCache {
    dimension: usize,
    path: Option<PathBuf>,
    entries: RwLock<HashMap<CacheKey, Vec<f32>>>,
    writer: Mutex<Option<BufWriter<File>>>,
    report: CacheLoadReport,
}

fn encode_record(key: &CacheKey, values: &[f32]) -> Vec<u8> {
    let mut rec = Vec::with_capacity(record_bytes(values.len()));
    rec.extend_from_slice(&key.text);
    rec.extend_from_slice(&key.provider.to_le_bytes());
    for v in values {
        rec.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&rec);
    rec.extend_from_slice(&crc.to_le_bytes());
    rec
}

impl EmbeddingCache {
    /// Cache that lives only in memory.
    pub fn in_memory(dimension: usize) -> Self {
        Self {
            dimension,
            path: None,
            entries: RwLock::new(HashMap::new()),
            writer: Mutex::new(None),
            report: CacheLoadReport::default(),
        }
    }

    /// Opens or creates a cache file. Records failing their checksum are
    /// skipped and counted; a partial trailing record is ignored.
    pub fn open(path: impl AsRef<Path>, dimension: usize) -> Result<Self, EmbedError> {
        let path = path.as_ref().to_path_buf();
        let bad = |m: String| EmbedError::Cache(format!("{}: {m}", path.display()));
        if dimension == 0 || dimension > u16::MAX as usize {
            return Err(bad(format!("unsupported dimension {dimension}")));
        }
        let mut entries = HashMap::new();
        let mut report = CacheLoadReport::default();
        let mut valid_len = CACHE_HEADER_BYTES as u64;
        if path.exists() {
            let mut bytes = Vec::new();
            File::open(&path)?.read_to_end(&mut bytes)?;
            if bytes.len() < CACHE_HEADER_BYTES || &bytes[..4] != CACHE_MAGIC {
                return Err(bad("not an embedding cache".into()));
            }
            let version = u16::from_le_bytes([bytes[4], bytes[5]]);
            let dim = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
            if version != CACHE_VERSION {
                return Err(bad(format!("unsupported version {version}")));
            }
            if dim != dimension {
                return Err(bad(format!("dimension {dim}, expected {dimension}")));
            }
            let rb = record_bytes(dimension);
            let body = &bytes[CACHE_HEADER_BYTES..];
            let whole = body.len() / rb;
            report.truncated_bytes = body.len() - whole * rb;
            for rec in body.chunks_exact(rb) {
                let (payload, crc) = rec.split_at(rb - 4);
                if crc32fast::hash(payload) != u32::from_le_bytes(crc.try_into().unwrap()) {
                    report.corrupt += 1;
                    continue;
                }
                let key = CacheKey {
                    text: payload[..32].try_into().unwrap(),
                    provider: u64::from_le_bytes(payload[32..40].try_into().unwrap()),
                };
                let values = payload[40..]
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                    .collect();
                entries.insert(key, values);
            }
            report.loaded = entries.len();
            valid_len += (whole * rb) as u64;
        }
        if path.exists() {
            // drop a torn tail so appends stay record-aligned
            OpenOptions::new()
                .write(true)
                .open(&path)?
                .set_len(valid_len)?;
        } else {
            let mut f = File::create(&path)?;
            f.write_all(CACHE_MAGIC)?;
            f.write_all(&CACHE_VERSION.to_le_bytes())?;
            f.write_all(&(dimension as u16).to_le_bytes())?;
        }
        let file = OpenOptions::new().append(true).open(&path)?;
        Ok(Self {
            dimension,
            path: Some(path),
            entries: RwLock::new(entries),
            writer: Mutex::new(Some(BufWriter::new(file))),
            report,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn load_report(&self) -> &CacheLoadReport {
        &self.report
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &CacheKey) -> Option<Vec<f32>> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    pub fn put(&self, key: CacheKey, values: &[f32]) -> Result<(), EmbedError> {
        if values.len() != self.dimension {
            return Err(EmbedError::Dimension {
                expected: self.dimension,
                got: values.len(),
            });
        }
        let mut entries = self.entries.write().expect("cache lock");
        if entries.get(&key).is_some_and(|v| v == values) {
            return Ok(());
        }
        if let Some(w) = self.writer.lock().expect("cache writer lock").as_mut() {
            w.write_all(&encode_record(&key, values))?;
        }
        entries.insert(key, values.to_vec());
        Ok(())
    }

    pub fn flush(&self) -> Result<(), EmbedError> {
        if let Some(w) = self.writer.lock().expect("cache writer lock").as_mut() {
            w.flush()?;
        }
        Ok(())
    }
}

impl Drop for EmbeddingCache {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}

/// Provider wrapper that consults the cache before embedding a chunk.
pub struct CachedProvider<P> {
    inner: P,
    cache: std::sync::Arc<EmbeddingCache>,
}

impl<P: EmbeddingProvider> CachedProvider<P> {
    pub fn new(inner: P, cache: std::sync::Arc<EmbeddingCache>) -> Result<Self, EmbedError> {
        if cache.dimension() != inner.dimension() {
            return Err(EmbedError::Dimension {
                expected: inner.dimension(),
                got: cache.dimension(),
            });
        }
        Ok(Self { inner, cache })
    }

    pub fn cache(&self) -> &EmbeddingCache {
        &self.cache
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedProvider<P> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn token_budget(&self) -> usize {
        self.inner.token_budget()
    }

    fn embed_chunk(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        let key = CacheKey::new(self.inner.id(), text);
        if let Some(v) = self.cache.get(&key) {
            return Ok(v);
        }
        let v = self.inner.embed_chunk(text)?;
        self.cache.put(key, &v)?;
        Ok(v)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError> {
        let keys: Vec<CacheKey> = texts
            .iter()
            .map(|t| CacheKey::new(self.inner.id(), t))
            .collect();
        let mut out: Vec<Option<Vec<f32>>> = keys.iter().map(|k| self.cache.get(k)).collect();
        let missing: Vec<usize> = (0..texts.len()).filter(|&i| out[i].is_none()).collect();
        if !missing.is_empty() {
            let batch: Vec<&str> = missing.iter().map(|&i| texts[i]).collect();
            let vecs = self.inner.embed_batch(&batch)?;
            for (&i, v) in missing.iter().zip(vecs) {
                self.cache.put(keys[i], &v)?;
                out[i] = Some(v);
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled")).collect())
    }
}
