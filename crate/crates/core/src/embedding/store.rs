//! Binary embedding store.
//!
//! Little-endian layout: `b"EMBV"`, u32 version (1), u32 dim, u64 count, then
//! `count` records of `[u32 key length, key bytes, dim x f32]`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{EmbeddingBackend, EmbeddingError, EmbeddingVector, ProviderKind};

pub const MAGIC: &[u8; 4] = b"EMBV";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    pub path: PathBuf,
    dim: usize,
    entries: BTreeMap<String, Vec<f32>>,
}

impl EmbeddingStore {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.entries.len()
    }

    pub fn raw(&self, key: &str) -> Option<&[f32]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    pub fn entries(&self) -> &BTreeMap<String, Vec<f32>> {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let raw = self
            .raw(key)
            .ok_or_else(|| EmbeddingError::NotFound(key.to_string()))?;
        EmbeddingVector::from_f32(raw)
    }
}

impl EmbeddingBackend for EmbeddingStore {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Store
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        texts.iter().map(|t| self.get(t)).collect()
    }
}

pub fn encode_store(entries: &BTreeMap<String, Vec<f32>>) -> Result<Vec<u8>, EmbeddingError> {
    let dim = entries.values().next().map_or(0, Vec::len);
    for v in entries.values() {
        if v.len() != dim {
            return Err(EmbeddingError::MixedDimensions(dim, v.len()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
    }
    let dim32 = u32::try_from(dim).map_err(|_| EmbeddingError::Corrupt("dim overflow".into()))?;
    let mut buf = Vec::with_capacity(20 + entries.len() * (8 + 4 * dim));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&dim32.to_le_bytes());
    buf.extend_from_slice(&(entries.len() as u64).to_le_bytes());
    for (key, values) in entries {
        let len = u32::try_from(key.len())
            .map_err(|_| EmbeddingError::Corrupt(format!("key too long: {}", key.len())))?;
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(key.as_bytes());
        for x in values {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(buf)
}

pub fn write_store(path: &Path, entries: &BTreeMap<String, Vec<f32>>) -> Result<(), EmbeddingError> {
    let bytes = encode_store(entries)?;
    fs::write(path, bytes)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], EmbeddingError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| EmbeddingError::Corrupt(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, EmbeddingError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, EmbeddingError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_store(bytes: &[u8], path: PathBuf) -> Result<EmbeddingStore, EmbeddingError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(EmbeddingError::Corrupt("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(EmbeddingError::Corrupt(format!("unsupported version {version}")));
    }
    let dim = cur.u32()? as usize;
    let count = cur.u64()?;
    let mut entries = BTreeMap::new();
    for _ in 0..count {
        let len = cur.u32()? as usize;
        let key = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| EmbeddingError::Corrupt("key is not utf-8".into()))?
            .to_string();
        let values: Vec<f32> = cur
            .take(dim * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        if values.iter().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::Corrupt(format!("non-finite value for {key:?}")));
        }
        if entries.insert(key.clone(), values).is_some() {
            return Err(EmbeddingError::Corrupt(format!("duplicate key {key:?}")));
        }
    }
    if cur.pos != bytes.len() {
        return Err(EmbeddingError::Corrupt("trailing bytes".into()));
    }
    if dim == 0 && count > 0 {
        return Err(EmbeddingError::Corrupt("zero dimension".into()));
    }
    Ok(EmbeddingStore { path, dim, entries })
}

pub fn read_store(path: &Path) -> Result<EmbeddingStore, EmbeddingError> {
    let bytes = fs::read(path)?;
    decode_store(&bytes, path.to_path_buf())
}
