//! Model-free embedder: each whitespace token hashes to a seeded Gaussian
//! direction and a text is the normalized mean of its token directions.
//! Texts that share tokens land close together.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{EmbeddingBackend, EmbeddingError, EmbeddingVector, ProviderKind};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "hash embedder needs a positive dimension");
        Self { dim, seed }
    }

    fn token_vector(&self, token: &str, acc: &mut [f64]) {
        let key = fnv1a(token.as_bytes()) ^ self.seed.rotate_left(17);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        for slot in acc.iter_mut() {
            let x: f64 = StandardNormal.sample(&mut rng);
            *slot += x;
        }
    }

    pub fn embed_text(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let mut acc = vec![0.0; self.dim];
        let mut n = 0usize;
        for token in text.split_whitespace() {
            self.token_vector(token, &mut acc);
            n += 1;
        }
        if n == 0 {
            return Err(EmbeddingError::EmptyText);
        }
        for v in &mut acc {
            *v /= n as f64;
        }
        EmbeddingVector::new(acc)?.normalized()
    }
}

impl EmbeddingBackend for HashEmbedder {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Hash
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        texts.iter().map(|t| self.embed_text(t)).collect()
    }
}
