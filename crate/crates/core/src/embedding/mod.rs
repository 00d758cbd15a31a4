//! Text embeddings behind a pluggable provider, plus the cosine kernel.
//!
//! Three backends exist: a precomputed binary [`store`], an HTTP model
//! service ([`http`]) and a deterministic [`hash`] embedder that needs no model
//! at all. [`EmbeddingProvider`] wraps any backend with a per-text memo so
//! repeated queries return bit-identical vectors.

pub mod hash;
pub mod http;
pub mod store;

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hash::HashEmbedder;
pub use http::{HttpConfig, HttpEmbedder};
pub use store::{read_store, write_store, EmbeddingStore};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("vector contains non-finite values")]
    NonFinite,
    #[error("empty vector")]
    EmptyVector,
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("key {0:?} not found in embedding store")]
    NotFound(String),
    #[error("mixed dimensions in store entries: {0} and {1}")]
    MixedDimensions(usize, usize),
    #[error("corrupt embedding store: {0}")]
    Corrupt(String),
    #[error("embedding store i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("http embedding request failed after {attempts} attempt(s): {message}")]
    Http { attempts: u32, message: String },
}

/// A finite, non-empty vector of 64-bit floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        if values.is_empty() {
            return Err(EmbeddingError::EmptyVector);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        Ok(Self(values))
    }

    pub fn from_f32(values: &[f32]) -> Result<Self, EmbeddingError> {
        Self::new(values.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|v| v * factor).collect())
    }

    /// Unit-norm copy; fails on the zero vector.
    pub fn normalized(&self) -> Result<Self, EmbeddingError> {
        let n = self.norm();
        if n == 0.0 {
            return Err(EmbeddingError::ZeroNorm);
        }
        Ok(self.scaled(1.0 / n))
    }

    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a EmbeddingVector>) -> Self {
        Self(parts.into_iter().flat_map(|p| p.0.iter().copied()).collect())
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = EmbeddingError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Cosine similarity clamped to [-1, 1].
pub fn cosine_similarity(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    cosine_slices(u.values(), v.values())
}

pub(crate) fn cosine_slices(u: &[f64], v: &[f64]) -> Result<f64, EmbeddingError> {
    if u.len() != v.len() {
        return Err(EmbeddingError::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(EmbeddingError::ZeroNorm);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Store,
    Http,
    Hash,
    /// Anything supplied by the caller, e.g. scripted providers in tests.
    Custom,
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderKind::Store => "store",
            ProviderKind::Http => "http",
            ProviderKind::Hash => "hash",
            ProviderKind::Custom => "custom",
        })
    }
}

/// A source of fixed-dimension text vectors.
pub trait EmbeddingBackend: Send + Sync {
    fn kind(&self) -> ProviderKind;

    fn dim(&self) -> usize;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError>;
}

/// Memoizing front end over an [`EmbeddingBackend`].
pub struct EmbeddingProvider {
    backend: Box<dyn EmbeddingBackend>,
    cache: Mutex<HashMap<String, EmbeddingVector>>,
}

impl fmt::Debug for EmbeddingProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EmbeddingProvider")
            .field("kind", &self.kind())
            .field("dim", &self.dim())
            .field("cached", &self.cache_len())
            .finish()
    }
}

impl EmbeddingProvider {
    pub fn new(backend: impl EmbeddingBackend + 'static) -> Self {
        Self {
            backend: Box::new(backend),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn hash(dim: usize, seed: u64) -> Self {
        Self::new(HashEmbedder::new(dim, seed))
    }

    pub fn kind(&self) -> ProviderKind {
        self.backend.kind()
    }

    pub fn dim(&self) -> usize {
        self.backend.dim()
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        Ok(self.embed_many(&[text])?.remove(0))
    }

    /// Embeds several texts, sending only cache misses to the backend.
    pub fn embed_many(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(EmbeddingError::EmptyText);
        }
        let mut misses: Vec<&str> = {
            let cache = self.cache.lock().expect("cache lock");
            texts
                .iter()
                .copied()
                .filter(|t| !cache.contains_key(*t))
                .collect()
        };
        misses.sort_unstable();
        misses.dedup();
        if !misses.is_empty() {
            let fresh = self.backend.embed_batch(&misses)?;
            let dim = self.dim();
            for v in &fresh {
                if v.dim() != dim {
                    return Err(EmbeddingError::DimensionMismatch {
                        expected: dim,
                        actual: v.dim(),
                    });
                }
            }
            let mut cache = self.cache.lock().expect("cache lock");
            for (text, v) in misses.iter().zip(fresh) {
                // First writer wins so concurrent callers agree bit-for-bit.
                cache.entry(text.to_string()).or_insert(v);
            }
        }
        let cache = self.cache.lock().expect("cache lock");
        Ok(texts.iter().map(|t| cache[*t].clone()).collect())
    }

    /// Writes every memoized vector to an embedding store file.
    pub fn flush_to_store(&self, path: &std::path::Path) -> Result<(), EmbeddingError> {
        let cache = self.cache.lock().expect("cache lock");
        let entries = cache
            .iter()
            .map(|(k, v)| (k.clone(), v.values().iter().map(|&x| x as f32).collect()))
            .collect();
        write_store(path, &entries)
    }
}
