//! End-to-end orchestration: configuration, input assembly and the stages
//! behind each CLI subcommand.

pub mod assemble;
pub mod stages;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{CorpusError, NormalizeConfig};
use crate::embedding::{read_store, EmbeddingError, EmbeddingProvider, HttpConfig, HttpEmbedder};
use crate::evaluation::{AblationConfig, EvalError};
use crate::labeler::{LabelError, LabelerConfig};
use crate::lexicon::LexiconError;
use crate::matcher::{MatchError, MatcherConfig};
use crate::metric::{MetricError, TrainConfig};
use crate::viz::{ProjectionConfig, VizError};

pub use stages::{run_stage, Stage};

pub const SEED_ENV: &str = "KIRELEX_SEED";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Viz(#[from] VizError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: malformed artifact: {message}")]
    Artifact { path: PathBuf, message: String },
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub tweets: PathBuf,
    pub lexicon: PathBuf,
    /// EMBV store, read by the `store` provider.
    pub embedding_store: Option<PathBuf>,
    /// Defaults to `model.kirx` inside the output directory.
    pub checkpoint: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            tweets: "tweets.jsonl".into(),
            lexicon: "lexicon.jsonl".into(),
            embedding_store: None,
            checkpoint: None,
            output_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderConfig {
    Hash {
        #[serde(default = "default_hash_dim")]
        dim: usize,
        #[serde(default)]
        seed: u64,
    },
    Store,
    Http(HttpConfig),
}

fn default_hash_dim() -> usize {
    64
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::Hash {
            dim: default_hash_dim(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Global seed; copied into every seeded stage.
    pub seed: u64,
    /// Fraction of each class used for training; the rest is held out.
    pub train_fraction: f64,
    pub paths: PathsConfig,
    pub provider: ProviderConfig,
    pub normalize: NormalizeConfig,
    pub matcher: MatcherConfig,
    pub train: TrainConfig,
    pub labeler: LabelerConfig,
    pub projection: ProjectionConfig,
    /// Configurations run by `ablate`.
    pub ablation: Vec<AblationConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            train_fraction: 0.8,
            paths: PathsConfig::default(),
            provider: ProviderConfig::default(),
            normalize: NormalizeConfig::default(),
            matcher: MatcherConfig::default(),
            train: TrainConfig::default(),
            labeler: LabelerConfig::default(),
            projection: ProjectionConfig::default(),
            ablation: AblationConfig::standard_grid(),
        }
    }
}

/// Sets `dotted.key` inside a JSON document. The value is parsed as JSON and
/// taken as a plain string when that fails.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), PipelineError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| PipelineError::Config(format!("override {assignment:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cursor = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(PipelineError::Config(format!("empty segment in key {key:?}")));
        }
        let obj = match cursor {
            Value::Object(m) => m,
            _ => return Err(PipelineError::Config(format!("{key:?}: {part:?} is not inside an object"))),
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cursor = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one segment")
}

impl PipelineConfig {
    /// Reads a JSON config, applies `key=value` overrides and the seed
    /// environment override, resolves relative paths against the config
    /// file's directory and validates the result.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, overrides, base, std::env::var(SEED_ENV).ok().as_deref())
    }

    pub fn from_json(
        text: &str,
        overrides: &[String],
        base: &Path,
        seed_env: Option<&str>,
    ) -> Result<Self, PipelineError> {
        let mut doc: Value =
            serde_json::from_str(text).map_err(|e| PipelineError::Config(format!("invalid JSON: {e}")))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let mut config: PipelineConfig =
            serde_json::from_value(doc).map_err(|e| PipelineError::Config(e.to_string()))?;
        if let Some(s) = seed_env {
            config.seed = s
                .trim()
                .parse()
                .map_err(|_| PipelineError::Config(format!("{SEED_ENV}={s:?} is not an unsigned integer")))?;
        }
        config.resolve_paths(base);
        config.propagate_seed();
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.tweets);
        fix(&mut self.paths.lexicon);
        fix(&mut self.paths.output_dir);
        if let Some(p) = &mut self.paths.embedding_store {
            fix(p);
        }
        if let Some(p) = &mut self.paths.checkpoint {
            fix(p);
        }
    }

    pub fn propagate_seed(&mut self) {
        self.train.seed = self.seed;
        self.projection.seed = self.seed;
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        for (name, p) in [("tweets", &self.paths.tweets), ("lexicon", &self.paths.lexicon)] {
            if !p.is_file() {
                return bad(format!("paths.{name}: {} does not exist", p.display()));
            }
        }
        if let ProviderConfig::Store = self.provider {
            match &self.paths.embedding_store {
                Some(p) if p.is_file() => {}
                Some(p) => return bad(format!("paths.embedding_store: {} does not exist", p.display())),
                None => return bad("provider \"store\" needs paths.embedding_store".into()),
            }
        }
        if let ProviderConfig::Hash { dim: 0, .. } = self.provider {
            return bad("provider.dim must be positive".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction must be in (0, 1), got {}", self.train_fraction));
        }
        self.matcher.validate()?;
        self.train.validate()?;
        if self.labeler.k == 0 {
            return bad("labeler.k must be at least 1".into());
        }
        if self.ablation.is_empty() {
            return bad("ablation grid is empty".into());
        }
        Ok(())
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.paths
            .checkpoint
            .clone()
            .unwrap_or_else(|| self.paths.output_dir.join(stages::CHECKPOINT_FILE))
    }

    /// SHA-256 of the canonical JSON form of the resolved config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn build_provider(&self) -> Result<EmbeddingProvider, PipelineError> {
        Ok(match &self.provider {
            ProviderConfig::Hash { dim, seed } => EmbeddingProvider::hash(*dim, *seed),
            ProviderConfig::Store => {
                let path = self.paths.embedding_store.as_ref().expect("validated");
                EmbeddingProvider::new(read_store(path)?)
            }
            ProviderConfig::Http(cfg) => EmbeddingProvider::new(HttpEmbedder::new(cfg.clone())),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn overrides_nested_keys() {
        let mut doc = json!({"train": {"epochs": 50}});
        apply_override(&mut doc, "train.epochs=3").unwrap();
        apply_override(&mut doc, "matcher.tau=0.5").unwrap();
        apply_override(&mut doc, "paths.output_dir=out2").unwrap();
        assert_eq!(doc["train"]["epochs"], 3);
        assert_eq!(doc["matcher"]["tau"], 0.5);
        assert_eq!(doc["paths"]["output_dir"], "out2");
        assert!(apply_override(&mut doc, "novalue").is_err());
        assert!(apply_override(&mut doc, "train.epochs.x=1").is_err());
    }

    #[test]
    fn seed_env_and_hash() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("tweets.jsonl"), "").unwrap();
        fs::write(dir.path().join("lexicon.jsonl"), "").unwrap();
        let a = PipelineConfig::from_json("{}", &[], dir.path(), None).unwrap();
        let b = PipelineConfig::from_json("{}", &[], dir.path(), Some("7")).unwrap();
        assert_eq!((b.seed, b.train.seed, b.projection.seed), (7, 7, 7));
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), PipelineConfig::from_json("{}", &[], dir.path(), None).unwrap().hash());
        assert!(PipelineConfig::from_json("{}", &[], dir.path(), Some("x")).is_err());
        assert!(PipelineConfig::from_json("{}", &["train_fraction=1.5".into()], dir.path(), None).is_err());
    }
}
