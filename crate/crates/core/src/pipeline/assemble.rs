//! In-memory pipeline steps shared by the CLI stages and the ablation harness.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::corpus::{tokenize, NormalizeConfig, RelationLabel, TokenSequence, TweetCollection};
use crate::embedding::{EmbeddingProvider, EmbeddingVector};
use crate::labeler::{knn_label, LabeledPoint, LabelerConfig, WeakLabel};
use crate::lexicon::Lexicon;
use crate::matcher::{match_phrases, MatcherConfig, PhraseMatchRecord};
use crate::metric::{train, ExampleVector, MetricModel, TrainConfig, TrainHistory};

/// How a tweet becomes a model input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputMode {
    /// `[substituted tweet, cannabis phrase, depression phrase]` embeddings.
    Knowledge,
    /// The normalized tweet embedding alone; the matcher is bypassed.
    WholeTweet,
}

#[derive(Debug, Clone)]
pub struct PreparedTweet {
    pub id: String,
    pub raw_text: String,
    pub label: Option<RelationLabel>,
    pub tokens: TokenSequence,
    pub record: PhraseMatchRecord,
}

pub fn tokenize_all(collection: &TweetCollection, normalize: &NormalizeConfig) -> Vec<TokenSequence> {
    collection.tweets.iter().map(|t| tokenize(t, normalize)).collect()
}

pub fn match_corpus(
    tokens: &[TokenSequence],
    lexicon: &Lexicon,
    provider: &EmbeddingProvider,
    config: &MatcherConfig,
) -> Result<Vec<PhraseMatchRecord>, PipelineError> {
    tokens
        .iter()
        .map(|t| match_phrases(t, lexicon, provider, config).map_err(PipelineError::from))
        .collect()
}

pub fn prepare(
    collection: &TweetCollection,
    lexicon: &Lexicon,
    provider: &EmbeddingProvider,
    matcher: &MatcherConfig,
    normalize: &NormalizeConfig,
) -> Result<Vec<PreparedTweet>, PipelineError> {
    let tokens = tokenize_all(collection, normalize);
    let records = match_corpus(&tokens, lexicon, provider, matcher)?;
    Ok(join(collection, tokens, records))
}

/// Pairs tweets with their tokens and match records (all in collection order).
pub fn join(
    collection: &TweetCollection,
    tokens: Vec<TokenSequence>,
    records: Vec<PhraseMatchRecord>,
) -> Vec<PreparedTweet> {
    collection
        .tweets
        .iter()
        .zip(tokens)
        .zip(records)
        .map(|((t, tokens), record)| PreparedTweet {
            id: t.id.clone(),
            raw_text: t.raw_text.clone(),
            label: t.label,
            tokens,
            record,
        })
        .collect()
}

fn embed_or_raw(
    provider: &EmbeddingProvider,
    text: &str,
    raw: &str,
) -> Result<EmbeddingVector, PipelineError> {
    // Tweets made only of stopwords normalize to nothing; fall back to raw text.
    let text = if text.trim().is_empty() { raw.trim() } else { text };
    Ok(provider.embed(text)?)
}

pub fn input_dim(provider: &EmbeddingProvider, mode: InputMode) -> usize {
    match mode {
        InputMode::Knowledge => 3 * provider.dim(),
        InputMode::WholeTweet => provider.dim(),
    }
}

/// Builds the model input for one tweet. Missing phrase matches contribute
/// zero blocks.
pub fn assemble_input(
    tweet: &PreparedTweet,
    provider: &EmbeddingProvider,
    mode: InputMode,
) -> Result<EmbeddingVector, PipelineError> {
    match mode {
        InputMode::WholeTweet => embed_or_raw(provider, &tweet.tokens.text(), &tweet.raw_text),
        InputMode::Knowledge => {
            let tweet_vec = embed_or_raw(provider, &tweet.record.substituted, &tweet.raw_text)?;
            let phrase = |m: Option<&crate::matcher::PhraseMatch>| match m {
                Some(m) => provider.embed(&m.canonical),
                None => Ok(EmbeddingVector::zeros(provider.dim())),
            };
            let c = phrase(tweet.record.cannabis.as_ref())?;
            let d = phrase(tweet.record.depression.as_ref())?;
            Ok(EmbeddingVector::concat([&tweet_vec, &c, &d]))
        }
    }
}

/// Labeled tweets from `ids` usable for training under `mode`; in knowledge
/// mode only tweets with both phrases matched qualify.
pub fn training_examples(
    tweets: &[PreparedTweet],
    ids: &[String],
    provider: &EmbeddingProvider,
    mode: InputMode,
) -> Result<Vec<ExampleVector>, PipelineError> {
    let wanted: HashSet<&str> = ids.iter().map(String::as_str).collect();
    let mut out = Vec::new();
    for t in tweets {
        let Some(label) = t.label else { continue };
        if !wanted.contains(t.id.as_str()) {
            continue;
        }
        if mode == InputMode::Knowledge && !t.record.is_matched() {
            continue;
        }
        out.push(ExampleVector {
            tweet_id: t.id.clone(),
            input: assemble_input(t, provider, mode)?,
            label,
        });
    }
    Ok(out)
}

/// A fitted relation classifier: optional projection head plus the labeled
/// reference points that neighbours are drawn from.
#[derive(Debug, Clone)]
pub struct RelationClassifier {
    pub model: Option<MetricModel>,
    pub mode: InputMode,
    pub reference: Vec<LabeledPoint>,
}

pub fn represent(model: Option<&MetricModel>, input: &EmbeddingVector) -> Result<EmbeddingVector, PipelineError> {
    Ok(match model {
        Some(m) => m.represent(input)?,
        None => input.normalized()?,
    })
}

impl RelationClassifier {
    pub fn new(
        model: Option<MetricModel>,
        mode: InputMode,
        examples: &[ExampleVector],
    ) -> Result<Self, PipelineError> {
        let reference = examples
            .iter()
            .map(|e| {
                Ok(LabeledPoint {
                    id: e.tweet_id.clone(),
                    representation: represent(model.as_ref(), &e.input)?,
                    label: e.label,
                })
            })
            .collect::<Result<_, PipelineError>>()?;
        Ok(Self {
            model,
            mode,
            reference,
        })
    }

    /// Trains (when `contrastive`) and indexes the reference set.
    pub fn fit(
        examples: &[ExampleVector],
        mode: InputMode,
        contrastive: bool,
        config: &TrainConfig,
    ) -> Result<(Self, Option<TrainHistory>), PipelineError> {
        if examples.is_empty() {
            return Err(PipelineError::Config("no usable training examples".into()));
        }
        let (model, history) = if contrastive {
            let (m, h) = train(examples, config)?;
            (Some(m), Some(h))
        } else {
            (None, None)
        };
        Ok((Self::new(model, mode, examples)?, history))
    }

    pub fn label(
        &self,
        tweets: &[&PreparedTweet],
        provider: &EmbeddingProvider,
        config: &LabelerConfig,
    ) -> Result<Vec<WeakLabel>, PipelineError> {
        let queries = tweets
            .iter()
            .map(|t| {
                let input = assemble_input(t, provider, self.mode)?;
                Ok((t.id.clone(), represent(self.model.as_ref(), &input)?))
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        Ok(knn_label(&self.reference, &queries, config)?)
    }
}

pub fn predictions_map(labels: &[WeakLabel]) -> BTreeMap<String, RelationLabel> {
    labels.iter().map(|w| (w.tweet_id.clone(), w.label)).collect()
}
