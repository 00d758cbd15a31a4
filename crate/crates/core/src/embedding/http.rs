//! Client for a remote embedding service.
//!
//! Protocol: `POST {base}/embed` with `{"texts": [...]}`; a 200 reply carries
//! `{"dim": D, "vectors": [[...], ...]}` in request order. Anything else is
//! an error. Failed requests are retried with exponential backoff.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbeddingBackend, EmbeddingError, EmbeddingVector, ProviderKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Base URL, e.g. `http://127.0.0.1:8099`.
    pub url: String,
    pub dim: usize,
    pub attempts: u32,
    pub backoff_ms: u64,
    pub timeout_ms: u64,
    pub batch_size: usize,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            url: "http://127.0.0.1:8099".into(),
            dim: 768,
            attempts: 3,
            backoff_ms: 250,
            timeout_ms: 30_000,
            batch_size: 64,
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

pub struct HttpEmbedder {
    config: HttpConfig,
    agent: ureq::Agent,
}

impl HttpEmbedder {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .build()
            .into();
        Self { config, agent }
    }

    fn endpoint(&self) -> String {
        format!("{}/embed", self.config.url.trim_end_matches('/'))
    }

    fn request_once(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, String> {
        let mut resp = self
            .agent
            .post(&self.endpoint())
            .send_json(&EmbedRequest { texts })
            .map_err(|e| e.to_string())?;
        if resp.status() != 200 {
            return Err(format!("status {}", resp.status()));
        }
        let body: EmbedResponse = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        if body.vectors.len() != texts.len() {
            return Err(format!(
                "expected {} vectors, got {}",
                texts.len(),
                body.vectors.len()
            ));
        }
        body.vectors
            .into_iter()
            .map(|v| {
                if v.len() != body.dim {
                    return Err(format!("vector of length {} but dim {}", v.len(), body.dim));
                }
                EmbeddingVector::new(v).map_err(|e| e.to_string())
            })
            .collect()
    }

    fn request(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        let attempts = self.config.attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let wait = self.config.backoff_ms << (attempt - 1);
                thread::sleep(Duration::from_millis(wait));
            }
            match self.request_once(texts) {
                Ok(vectors) => return Ok(vectors),
                Err(e) => {
                    log::warn!("embedding request attempt {} failed: {e}", attempt + 1);
                    last = e;
                }
            }
        }
        Err(EmbeddingError::Http {
            attempts,
            message: last,
        })
    }
}

impl EmbeddingBackend for HttpEmbedder {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Http
    }

    fn dim(&self) -> usize {
        self.config.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.config.batch_size.max(1)) {
            out.extend(self.request(chunk)?);
        }
        Ok(out)
    }
}
