//! Cannabis / depression phrase lexicon distilled from knowledge bases.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{normalize, NormalizeConfig};

/// Longest surface form, in tokens, that a lexicon entry may have.
pub const MAX_PHRASE_TOKENS: usize = 4;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon is empty")]
    Empty,
    #[error("category {0} empty")]
    EmptyCategory(Category),
    #[error("duplicate phrase {0:?}")]
    DuplicatePhrase(String),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Cannabis,
    Depression,
}

impl Category {
    pub const ALL: [Category; 2] = [Category::Cannabis, Category::Depression];
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Cannabis => "cannabis",
            Category::Depression => "depression",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub phrase: String,
    pub canonical: String,
    pub category: Category,
    pub source: String,
}

#[derive(Deserialize)]
struct RawEntry {
    phrase: String,
    #[serde(default)]
    canonical: Option<String>,
    category: String,
    #[serde(default)]
    source: Option<String>,
}

/// An immutable, validated lexicon indexed by surface form and category.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    by_phrase: HashMap<String, usize>,
    by_category: BTreeMap<Category, Vec<usize>>,
}

fn normalize_phrase(s: &str) -> String {
    normalize(s, &NormalizeConfig::without_stopwords()).join(" ")
}

impl Lexicon {
    /// Builds a lexicon without the both-categories-present check.
    ///
    /// Phrases are normalized and must be unique.
    pub fn from_entries(entries: Vec<LexiconEntry>) -> Result<Self, LexiconError> {
        let mut lex = Lexicon::default();
        for mut e in entries {
            e.phrase = normalize_phrase(&e.phrase);
            e.canonical = normalize_phrase(&e.canonical);
            if e.canonical.is_empty() {
                e.canonical = e.phrase.clone();
            }
            if lex.by_phrase.contains_key(&e.phrase) {
                return Err(LexiconError::DuplicatePhrase(e.phrase));
            }
            let idx = lex.entries.len();
            lex.by_phrase.insert(e.phrase.clone(), idx);
            lex.by_category.entry(e.category).or_default().push(idx);
            lex.entries.push(e);
        }
        Ok(lex)
    }

    /// Like [`Lexicon::from_entries`] but also requires both categories.
    pub fn validated(entries: Vec<LexiconEntry>) -> Result<Self, LexiconError> {
        if entries.is_empty() {
            return Err(LexiconError::Empty);
        }
        let lex = Self::from_entries(entries)?;
        for cat in Category::ALL {
            if lex.by_category.get(&cat).is_none_or(Vec::is_empty) {
                return Err(LexiconError::EmptyCategory(cat));
            }
        }
        Ok(lex)
    }

    pub fn parse_jsonl(text: &str) -> Result<Self, LexiconError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |message: String| LexiconError::Malformed {
                line: i + 1,
                message,
            };
            let raw: RawEntry =
                serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
            let category = match raw.category.to_lowercase().as_str() {
                "cannabis" => Category::Cannabis,
                "depression" => Category::Depression,
                other => return Err(malformed(format!("unknown category {other:?}"))),
            };
            let phrase = normalize_phrase(&raw.phrase);
            if phrase.is_empty() {
                return Err(malformed("empty phrase".into()));
            }
            if phrase.split(' ').count() > MAX_PHRASE_TOKENS {
                return Err(malformed(format!(
                    "phrase {phrase:?} longer than {MAX_PHRASE_TOKENS} tokens"
                )));
            }
            let canonical = raw.canonical.unwrap_or_else(|| phrase.clone());
            entries.push(LexiconEntry {
                phrase,
                canonical,
                category,
                source: raw.source.unwrap_or_default(),
            });
        }
        Self::validated(entries)
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, phrase: &str) -> Option<&LexiconEntry> {
        self.by_phrase.get(phrase).map(|&i| &self.entries[i])
    }

    pub fn category_entries(&self, category: Category) -> impl Iterator<Item = &LexiconEntry> {
        self.by_category
            .get(&category)
            .into_iter()
            .flatten()
            .map(|&i| &self.entries[i])
    }

    /// Surface forms of one category in lexicographic order.
    pub fn phrases(&self, category: Category) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .category_entries(category)
            .map(|e| e.phrase.as_str())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon, LexiconError> {
    let text = fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Lexicon::parse_jsonl(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{"phrase":"kiff","canonical":"cannabis resin","category":"cannabis","source":"DAO"}
{"phrase":"Weed","category":"cannabis"}
{"phrase":"blunt","category":"cannabis"}
{"phrase":"depressed","category":"depression","source":"PHQ-9"}
"#;

    #[test]
    fn loads_slang_entry() {
        let lex = Lexicon::parse_jsonl(SAMPLE).unwrap();
        let kiff = lex.lookup("kiff").unwrap();
        assert_eq!(kiff.category, Category::Cannabis);
        assert_eq!(kiff.canonical, "cannabis resin");
        assert_eq!(kiff.source, "DAO");
        assert_eq!(lex.lookup("weed").unwrap().canonical, "weed");
    }

    #[test]
    fn missing_category_is_an_error() {
        let text = "{\"phrase\":\"weed\",\"category\":\"cannabis\"}\n";
        let err = Lexicon::parse_jsonl(text).unwrap_err();
        assert_eq!(err.to_string(), "category depression empty");
    }

    #[test]
    fn duplicate_phrase_across_categories() {
        let text = "{\"phrase\":\"blunt\",\"category\":\"cannabis\"}\n{\"phrase\":\"blunt\",\"category\":\"depression\"}\n";
        assert!(matches!(
            Lexicon::parse_jsonl(text),
            Err(LexiconError::DuplicatePhrase(p)) if p == "blunt"
        ));
    }

    #[test]
    fn empty_file() {
        assert!(matches!(Lexicon::parse_jsonl(""), Err(LexiconError::Empty)));
    }

    #[test]
    fn phrases_sorted() {
        let lex = Lexicon::parse_jsonl(SAMPLE).unwrap();
        assert_eq!(lex.phrases(Category::Cannabis), vec!["blunt", "kiff", "weed"]);
        assert_eq!(lex.phrases(Category::Depression), vec!["depressed"]);
    }

    #[test]
    fn hand_built_lexicon_may_have_empty_category() {
        let lex = Lexicon::from_entries(vec![LexiconEntry {
            phrase: "weed".into(),
            canonical: "weed".into(),
            category: Category::Cannabis,
            source: String::new(),
        }])
        .unwrap();
        assert!(lex.phrases(Category::Depression).is_empty());
    }

    #[test]
    fn rejects_overlong_phrase() {
        let text = "{\"phrase\":\"a b c d e\",\"category\":\"cannabis\"}\n";
        assert!(matches!(
            Lexicon::parse_jsonl(text),
            Err(LexiconError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn lookup_roundtrips_every_entry() {
        let lex = Lexicon::parse_jsonl(SAMPLE).unwrap();
        for e in lex.entries() {
            assert_eq!(lex.lookup(&e.phrase), Some(e));
        }
        assert_eq!(Lexicon::parse_jsonl(&lex.to_jsonl()).unwrap(), lex);
    }
}
