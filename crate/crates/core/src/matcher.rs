//! N-gram extraction and lexicon phrase matching.
//!
//! Every n-gram of a normalized tweet is compared with every surface form of
//! each lexicon category. The best pair per category is kept when its cosine
//! similarity reaches `tau`. Matched spans can then be rewritten to their
//! canonical lexicon form.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TokenSequence;
use crate::embedding::{cosine_similarity, EmbeddingError, EmbeddingProvider};
use crate::lexicon::{Category, Lexicon, LexiconEntry, MAX_PHRASE_TOKENS};

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("invalid matcher config: {0}")]
    InvalidConfig(String),
    #[error("tweet {tweet_id}: cannabis span {cannabis:?} overlaps depression span {depression:?}")]
    OverlappingSpans {
        tweet_id: String,
        cannabis: Span,
        depression: Span,
    },
    #[error("span {span:?} out of bounds for {len} tokens")]
    SpanOutOfBounds { span: Span, len: usize },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatcherConfig {
    pub tau: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub substitution: bool,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self {
            tau: 0.75,
            n_min: 1,
            n_max: 3,
            substitution: true,
        }
    }
}

impl MatcherConfig {
    pub fn validate(&self) -> Result<(), MatchError> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(MatchError::InvalidConfig(format!("tau {} not in (0, 1]", self.tau)));
        }
        if !(1 <= self.n_min && self.n_min <= self.n_max && self.n_max <= MAX_PHRASE_TOKENS) {
            return Err(MatchError::InvalidConfig(format!(
                "need 1 <= n_min <= n_max <= {MAX_PHRASE_TOKENS}, got {}..={}",
                self.n_min, self.n_max
            )));
        }
        Ok(())
    }
}

/// Half-open token range `[start, end)`; serialized as `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl From<[usize; 2]> for Span {
    fn from([start, end]: [usize; 2]) -> Self {
        Self { start, end }
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ngram {
    pub text: String,
    pub span: Span,
}

/// Contiguous n-grams ordered by start position, then by length.
pub fn extract_ngrams(tokens: &[String], n_min: usize, n_max: usize) -> Vec<Ngram> {
    let n_min = n_min.max(1);
    let mut out = Vec::new();
    for start in 0..tokens.len() {
        for n in n_min..=n_max {
            let end = start + n;
            if end > tokens.len() {
                break;
            }
            out.push(Ngram {
                text: tokens[start..end].join(" "),
                span: Span::new(start, end),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhraseMatch {
    pub ngram: String,
    /// Matched lexicon surface form.
    pub phrase: String,
    pub canonical: String,
    pub sim: f64,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhraseMatchRecord {
    #[serde(rename = "id")]
    pub tweet_id: String,
    pub cannabis: Option<PhraseMatch>,
    pub depression: Option<PhraseMatch>,
    pub substituted: String,
}

impl PhraseMatchRecord {
    /// Both entities found; only such tweets feed training.
    pub fn is_matched(&self) -> bool {
        self.cannabis.is_some() && self.depression.is_some()
    }

    pub fn get(&self, category: Category) -> Option<&PhraseMatch> {
        match category {
            Category::Cannabis => self.cannabis.as_ref(),
            Category::Depression => self.depression.as_ref(),
        }
    }
}

/// Candidate ordering: higher similarity, longer n-gram, leftmost span,
/// lexicographically smaller phrase. `Less` means "better".
pub fn candidate_order(a: (&PhraseMatch, usize), b: (&PhraseMatch, usize)) -> Ordering {
    let (ma, len_a) = a;
    let (mb, len_b) = b;
    mb.sim
        .total_cmp(&ma.sim)
        .then(len_b.cmp(&len_a))
        .then(ma.span.start.cmp(&mb.span.start))
        .then(ma.phrase.cmp(&mb.phrase))
}

fn best_for_category(
    ngrams: &[Ngram],
    ngram_vecs: &[crate::embedding::EmbeddingVector],
    entries: &[&LexiconEntry],
    provider: &EmbeddingProvider,
    tau: f64,
) -> Result<Option<PhraseMatch>, MatchError> {
    if entries.is_empty() || ngrams.is_empty() {
        return Ok(None);
    }
    let phrase_texts: Vec<&str> = entries.iter().map(|e| e.phrase.as_str()).collect();
    let phrase_vecs = provider.embed_many(&phrase_texts)?;
    let mut best: Option<PhraseMatch> = None;
    for (ngram, nv) in ngrams.iter().zip(ngram_vecs) {
        for (entry, pv) in entries.iter().zip(&phrase_vecs) {
            let sim = if ngram.text == entry.phrase {
                1.0
            } else {
                cosine_similarity(nv, pv)?
            };
            if sim < tau {
                continue;
            }
            let cand = PhraseMatch {
                ngram: ngram.text.clone(),
                phrase: entry.phrase.clone(),
                canonical: entry.canonical.clone(),
                sim,
                span: ngram.span,
            };
            let better = match &best {
                None => true,
                Some(b) => candidate_order((&cand, cand.span.len()), (b, b.span.len())).is_lt(),
            };
            if better {
                best = Some(cand);
            }
        }
    }
    Ok(best)
}

pub fn match_phrases(
    tweet: &TokenSequence,
    lexicon: &Lexicon,
    provider: &EmbeddingProvider,
    config: &MatcherConfig,
) -> Result<PhraseMatchRecord, MatchError> {
    config.validate()?;
    let ngrams = extract_ngrams(&tweet.tokens, config.n_min, config.n_max);
    let texts: Vec<&str> = ngrams.iter().map(|g| g.text.as_str()).collect();
    let ngram_vecs = if texts.is_empty() {
        Vec::new()
    } else {
        provider.embed_many(&texts)?
    };
    let mut found = Vec::with_capacity(2);
    for category in Category::ALL {
        let entries: Vec<&LexiconEntry> = lexicon.category_entries(category).collect();
        found.push(best_for_category(&ngrams, &ngram_vecs, &entries, provider, config.tau)?);
    }
    let depression = found.pop().flatten();
    let cannabis = found.pop().flatten();
    let mut record = PhraseMatchRecord {
        tweet_id: tweet.source_id.clone(),
        cannabis,
        depression,
        substituted: tweet.text(),
    };
    if config.substitution {
        record.substituted = substitute(tweet, &record)?;
    } else if let (Some(c), Some(d)) = (&record.cannabis, &record.depression) {
        check_overlap(&record.tweet_id, c.span, d.span)?;
    }
    Ok(record)
}

fn check_overlap(tweet_id: &str, cannabis: Span, depression: Span) -> Result<(), MatchError> {
    if cannabis.overlaps(&depression) {
        return Err(MatchError::OverlappingSpans {
            tweet_id: tweet_id.to_string(),
            cannabis,
            depression,
        });
    }
    Ok(())
}

/// Rewrites each matched span to the canonical lexicon phrase.
pub fn substitute(tweet: &TokenSequence, record: &PhraseMatchRecord) -> Result<String, MatchError> {
    let mut replacements: Vec<(Span, &str)> = Vec::new();
    for m in [&record.cannabis, &record.depression].into_iter().flatten() {
        if m.span.is_empty() || m.span.end > tweet.len() {
            return Err(MatchError::SpanOutOfBounds {
                span: m.span,
                len: tweet.len(),
            });
        }
        replacements.push((m.span, m.canonical.as_str()));
    }
    if let (Some(c), Some(d)) = (&record.cannabis, &record.depression) {
        check_overlap(&record.tweet_id, c.span, d.span)?;
    }
    replacements.sort_by_key(|(s, _)| std::cmp::Reverse(s.start));
    let mut tokens: Vec<String> = tweet.tokens.clone();
    for (span, phrase) in replacements {
        tokens.splice(span.start..span.end, [phrase.to_string()]);
    }
    Ok(tokens.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{EmbeddingBackend, EmbeddingVector, ProviderKind};
    use std::collections::HashMap;
    use std::sync::Mutex;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn seq(s: &str) -> TokenSequence {
        TokenSequence::new("t", toks(s))
    }

    /// Scripted provider: listed texts get fixed vectors, any other text gets
    /// its own fresh axis so it is orthogonal to everything else.
    struct Scripted {
        dim: usize,
        fixed: HashMap<String, Vec<f64>>,
        fresh: Mutex<(usize, HashMap<String, usize>)>,
    }

    impl Scripted {
        /// `pairs` are (ngram, phrase, similarity) with distinct texts.
        fn new(pairs: &[(&str, &str, f64)]) -> Self {
            let dim = 256;
            let mut fixed = HashMap::new();
            let mut axis = 0;
            for (ngram, phrase, sim) in pairs {
                let mut p = vec![0.0; dim];
                p[axis] = 1.0;
                let mut g = vec![0.0; dim];
                g[axis] = *sim;
                g[axis + 1] = (1.0 - sim * sim).sqrt();
                fixed.insert(phrase.to_string(), p);
                fixed.insert(ngram.to_string(), g);
                axis += 2;
            }
            Self {
                dim,
                fixed,
                fresh: Mutex::new((axis, HashMap::new())),
            }
        }
    }

    impl EmbeddingBackend for Scripted {
        fn kind(&self) -> ProviderKind {
            ProviderKind::Custom
        }
        fn dim(&self) -> usize {
            self.dim
        }
        fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
            let mut fresh = self.fresh.lock().unwrap();
            Ok(texts
                .iter()
                .map(|t| {
                    let v = self.fixed.get(*t).cloned().unwrap_or_else(|| {
                        let next = fresh.0;
                        let axis = *fresh.1.entry(t.to_string()).or_insert(next);
                        if axis == next {
                            fresh.0 += 1;
                        }
                        let mut v = vec![0.0; self.dim];
                        v[axis] = 1.0;
                        v
                    });
                    EmbeddingVector::new(v).unwrap()
                })
                .collect())
        }
    }

    fn entry(phrase: &str, category: Category) -> LexiconEntry {
        LexiconEntry {
            phrase: phrase.into(),
            canonical: phrase.into(),
            category,
            source: String::new(),
        }
    }

    #[test]
    fn bigrams_of_reason_example() {
        let g = extract_ngrams(&toks("whole world emotionally depressed"), 2, 2);
        let texts: Vec<_> = g.iter().map(|g| g.text.as_str()).collect();
        assert_eq!(texts, vec!["whole world", "world emotionally", "emotionally depressed"]);
    }

    #[test]
    fn short_sequence_yields_unigram_only() {
        let g = extract_ngrams(&toks("a"), 1, 3);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].text, "a");
    }

    #[test]
    fn trigram_count() {
        let tokens: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
        assert_eq!(extract_ngrams(&tokens, 3, 3).len(), 8);
        assert!(extract_ngrams(&[], 1, 3).is_empty());
    }

    #[test]
    fn scripted_reason_tweet() {
        let provider = EmbeddingProvider::new(Scripted::new(&[
            ("emotionally depressed", "depressed mood", 0.9),
            ("need smoke blunt", "blunt smoking", 0.88),
        ]));
        let lex = Lexicon::validated(vec![
            entry("blunt smoking", Category::Cannabis),
            entry("depressed mood", Category::Depression),
        ])
        .unwrap();
        let tweet = seq("whole world emotionally depressed everybody need smoke blunt relax");
        let r = match_phrases(&tweet, &lex, &provider, &MatcherConfig::default()).unwrap();
        let d = r.depression.as_ref().unwrap();
        let c = r.cannabis.as_ref().unwrap();
        assert_eq!(d.ngram, "emotionally depressed");
        assert_eq!(d.span, Span::new(2, 4));
        assert!((d.sim - 0.9).abs() < 1e-12);
        assert_eq!(c.ngram, "need smoke blunt");
        assert_eq!(c.span, Span::new(5, 8));
        assert_eq!(
            r.substituted,
            "whole world depressed mood everybody blunt smoking relax"
        );
    }

    #[test]
    fn below_threshold_leaves_matches_absent() {
        let provider = EmbeddingProvider::new(Scripted::new(&[
            ("sad", "depressed", 0.5),
            ("ganja", "weed", 0.5),
        ]));
        let lex = Lexicon::validated(vec![
            entry("weed", Category::Cannabis),
            entry("depressed", Category::Depression),
        ])
        .unwrap();
        let tweet = seq("sad ganja");
        let r = match_phrases(&tweet, &lex, &provider, &MatcherConfig::default()).unwrap();
        assert!(r.cannabis.is_none() && r.depression.is_none());
        assert!(!r.is_matched());
        assert_eq!(r.substituted, "sad ganja");
    }

    #[test]
    fn strongest_candidate_wins() {
        let provider = EmbeddingProvider::new(Scripted::new(&[
            ("ganja", "weed", 0.80),
            ("reefer", "marijuana", 0.95),
            ("low", "depressed", 0.9),
        ]));
        let lex = Lexicon::validated(vec![
            entry("weed", Category::Cannabis),
            entry("marijuana", Category::Cannabis),
            entry("depressed", Category::Depression),
        ])
        .unwrap();
        let r = match_phrases(&seq("ganja low reefer"), &lex, &provider, &MatcherConfig::default())
            .unwrap();
        let c = r.cannabis.unwrap();
        assert_eq!((c.ngram.as_str(), c.phrase.as_str()), ("reefer", "marijuana"));
    }

    #[test]
    fn exact_hit_scores_one() {
        let provider = EmbeddingProvider::hash(32, 0);
        let lex = Lexicon::validated(vec![
            entry("smoke pot", Category::Cannabis),
            entry("anxiety", Category::Depression),
        ])
        .unwrap();
        let r = match_phrases(&seq("suffer anxiety smoke pot"), &lex, &provider, &MatcherConfig::default())
            .unwrap();
        assert_eq!(r.cannabis.as_ref().unwrap().sim, 1.0);
        assert_eq!(r.cannabis.as_ref().unwrap().span, Span::new(2, 4));
        assert_eq!(r.depression.as_ref().unwrap().sim, 1.0);
    }

    #[test]
    fn empty_tweet_has_no_matches() {
        let provider = EmbeddingProvider::hash(8, 0);
        let lex = Lexicon::validated(vec![
            entry("weed", Category::Cannabis),
            entry("sad", Category::Depression),
        ])
        .unwrap();
        let r = match_phrases(&seq(""), &lex, &provider, &MatcherConfig::default()).unwrap();
        assert!(r.cannabis.is_none() && r.depression.is_none());
    }

    fn pm(span: Span, canonical: &str) -> PhraseMatch {
        PhraseMatch {
            ngram: String::new(),
            phrase: canonical.into(),
            canonical: canonical.into(),
            sim: 1.0,
            span,
        }
    }

    #[test]
    fn substitute_replaces_span() {
        let tweet = seq("i need smoke blunt so bad");
        let record = PhraseMatchRecord {
            tweet_id: "t".into(),
            cannabis: Some(pm(Span::new(1, 4), "cannabis")),
            depression: None,
            substituted: String::new(),
        };
        assert_eq!(substitute(&tweet, &record).unwrap(), "i cannabis so bad");
    }

    #[test]
    fn substitute_without_matches_is_identity() {
        let tweet = seq("nothing to see");
        let record = PhraseMatchRecord {
            tweet_id: "t".into(),
            cannabis: None,
            depression: None,
            substituted: String::new(),
        };
        assert_eq!(substitute(&tweet, &record).unwrap(), "nothing to see");
    }

    #[test]
    fn overlapping_spans_rejected() {
        let tweet = seq("a b c d e f");
        let record = PhraseMatchRecord {
            tweet_id: "t".into(),
            cannabis: Some(pm(Span::new(2, 4), "x")),
            depression: Some(pm(Span::new(3, 5), "y")),
            substituted: String::new(),
        };
        assert!(matches!(
            substitute(&tweet, &record),
            Err(MatchError::OverlappingSpans { .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(MatcherConfig { tau: 0.0, ..Default::default() }.validate().is_err());
        assert!(MatcherConfig { n_max: 5, ..Default::default() }.validate().is_err());
        assert!(MatcherConfig { n_min: 3, n_max: 2, ..Default::default() }.validate().is_err());
        assert!(MatcherConfig::default().validate().is_ok());
    }
}
