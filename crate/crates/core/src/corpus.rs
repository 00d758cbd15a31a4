//! Tweet ingestion, text normalization and labeled/unlabeled splits.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no valid records in {0}")]
    Empty(String),
    #[error("duplicate tweet id {0:?}")]
    DuplicateId(String),
    #[error("unknown relation label {0:?}")]
    UnknownLabel(String),
    #[error("unsupported input format {0:?}")]
    UnknownFormat(String),
}

/// The three relations between a cannabis mention and a depression mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationLabel {
    Reason,
    Effect,
    Addiction,
}

impl RelationLabel {
    pub const ALL: [RelationLabel; 3] = [Self::Reason, Self::Effect, Self::Addiction];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Reason => "reason",
            Self::Effect => "effect",
            Self::Addiction => "addiction",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationLabel {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "reason" => Ok(Self::Reason),
            "effect" => Ok(Self::Effect),
            "addiction" => Ok(Self::Addiction),
            _ => Err(CorpusError::UnknownLabel(s.to_string())),
        }
    }
}

impl Serialize for RelationLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for RelationLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    #[serde(rename = "text")]
    pub raw_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<RelationLabel>,
}

/// Input file formats accepted by [`load_tweets`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputFormat {
    #[default]
    JsonLines,
}

impl FromStr for InputFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" | "json-lines" | "jsonlines" => Ok(Self::JsonLines),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TweetCollection {
    pub tweets: Vec<Tweet>,
    /// Records dropped at load time (malformed JSON, bad label, empty text).
    pub skipped: usize,
}

impl TweetCollection {
    pub fn new(tweets: Vec<Tweet>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for t in &tweets {
            if !seen.insert(t.id.as_str()) {
                return Err(CorpusError::DuplicateId(t.id.clone()));
            }
        }
        Ok(Self { tweets, skipped: 0 })
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn labeled(&self) -> impl Iterator<Item = (&Tweet, RelationLabel)> {
        self.tweets.iter().filter_map(|t| t.label.map(|l| (t, l)))
    }

    pub fn unlabeled(&self) -> impl Iterator<Item = &Tweet> {
        self.tweets.iter().filter(|t| t.label.is_none())
    }

    pub fn get(&self, id: &str) -> Option<&Tweet> {
        self.tweets.iter().find(|t| t.id == id)
    }

    /// Serializes as JSON-lines with lowercase labels.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.tweets {
            out.push_str(&serde_json::to_string(t).expect("tweet serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), CorpusError> {
        let io = |source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut f = fs::File::create(path).map_err(io)?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(io)
    }
}

pub fn load_tweets(path: &Path, format: InputFormat) -> Result<TweetCollection, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let collection = match format {
        InputFormat::JsonLines => parse_jsonl(&text)?,
    };
    if collection.tweets.is_empty() {
        return Err(CorpusError::Empty(path.display().to_string()));
    }
    if collection.skipped > 0 {
        log::warn!(
            "{}: skipped {} malformed record(s)",
            path.display(),
            collection.skipped
        );
    }
    Ok(collection)
}

fn parse_jsonl(text: &str) -> Result<TweetCollection, CorpusError> {
    let mut tweets = Vec::new();
    let mut skipped = 0;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Tweet>(line) {
            Ok(t) if !t.raw_text.trim().is_empty() && !t.id.is_empty() => tweets.push(t),
            _ => skipped += 1,
        }
    }
    let mut collection = TweetCollection::new(tweets)?;
    collection.skipped = skipped;
    Ok(collection)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub source_id: String,
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn new(source_id: impl Into<String>, tokens: Vec<String>) -> Self {
        Self {
            source_id: source_id.into(),
            tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for",
    "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herself",
    "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just",
    "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once",
    "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she",
    "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
    "themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too",
    "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
    "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
    "yourselves", "rt", "amp",
];

/// Characters removed without leaving a gap, so "doesn't" becomes "doesnt".
const JOINING_PUNCTUATION: &[char] = &['\'', '\u{2019}', '\u{2018}', '`'];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizeConfig {
    pub remove_stopwords: bool,
    pub stopwords: Vec<String>,
    /// Extra characters treated as punctuation on top of Unicode punctuation and symbols.
    pub extra_punctuation: Vec<char>,
}

impl Default for NormalizeConfig {
    fn default() -> Self {
        Self {
            remove_stopwords: true,
            stopwords: DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect(),
            extra_punctuation: Vec::new(),
        }
    }
}

impl NormalizeConfig {
    pub fn without_stopwords() -> Self {
        Self {
            remove_stopwords: false,
            ..Self::default()
        }
    }

    pub fn is_punctuation(&self, c: char) -> bool {
        is_default_punctuation(c) || self.extra_punctuation.contains(&c)
    }
}

fn is_default_punctuation(c: char) -> bool {
    if c.is_ascii() {
        return c.is_ascii_punctuation();
    }
    matches!(
        c,
        '\u{2010}'..='\u{2027}'
            | '\u{2030}'..='\u{205E}'
            | '\u{00A1}'..='\u{00BF}'
            | '\u{00D7}'
            | '\u{00F7}'
            | '\u{3000}'..='\u{303F}'
            | '\u{FE10}'..='\u{FE6F}'
            | '\u{FF01}'..='\u{FF0F}'
    ) && !c.is_alphanumeric()
}

fn url_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?:https?://|www\.)\S*").expect("valid regex"))
}

fn mention_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"@\w*").expect("valid regex"))
}

/// Lowercases and cleans tweet text into tokens.
///
/// Steps, in order: NFC, lowercase, drop URLs, drop @-mentions and the `#`
/// of hashtags, drop punctuation, split on whitespace, drop stopwords.
pub fn normalize(raw_text: &str, config: &NormalizeConfig) -> Vec<String> {
    let text: String = raw_text.nfc().collect::<String>().to_lowercase();
    let text = url_pattern().replace_all(&text, " ");
    let text = mention_pattern().replace_all(&text, " ");
    let text: String = text
        .chars()
        .filter(|c| !JOINING_PUNCTUATION.contains(c))
        .map(|c| if c == '#' || config.is_punctuation(c) { ' ' } else { c })
        .collect();
    text.split_whitespace()
        .filter(|tok| !(config.remove_stopwords && config.stopwords.iter().any(|s| s == tok)))
        .map(str::to_string)
        .collect()
}

pub fn tokenize(tweet: &Tweet, config: &NormalizeConfig) -> TokenSequence {
    TokenSequence::new(tweet.id.clone(), normalize(&tweet.raw_text, config))
}

/// Deterministic stratified split of labeled tweets into (train, held-out) ids.
///
/// Within each class the ids are shuffled with `seed` and the first
/// `round(train_fraction * n_class)` go to the training side.
pub fn stratified_split(
    collection: &TweetCollection,
    train_fraction: f64,
    seed: u64,
) -> (Vec<String>, Vec<String>) {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    let mut by_class: BTreeMap<RelationLabel, Vec<String>> = BTreeMap::new();
    for (t, label) in collection.labeled() {
        by_class.entry(label).or_default().push(t.id.clone());
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut held_out = Vec::new();
    for ids in by_class.values_mut() {
        ids.sort();
        ids.shuffle(&mut rng);
        let cut = (train_fraction * ids.len() as f64).round() as usize;
        train.extend_from_slice(&ids[..cut.min(ids.len())]);
        held_out.extend_from_slice(&ids[cut.min(ids.len())..]);
    }
    (train, held_out)
}
