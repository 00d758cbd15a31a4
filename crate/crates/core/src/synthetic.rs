//! Seeded synthetic corpus with a matching lexicon, for benchmarks and tests.
//!
//! Each tweet plants one cannabis phrase and one depression phrase among
//! filler words. The relation label is carried by the depression concept:
//! every concept belongs to one class, and its lexicon canonical form shares a
//! single class word with the other concepts of that class. Surface variants are
//! unrelated invented words, so the label is hard to read off the raw tweet
//! and easy once phrases are mapped to their canonical forms. Cannabis
//! concepts and filler topics are drawn independently of the label and act as
//! nuisance structure; with many concepts per class, most held-out tweets
//! carry a concept seen only a few times in training, so a classifier has to
//! pick up the shared class word rather than memorize concepts.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{RelationLabel, Tweet, TweetCollection, DEFAULT_STOPWORDS};
use crate::lexicon::{Category, Lexicon, LexiconEntry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_tweets: usize,
    /// Extra tweets generated without a label.
    pub n_unlabeled: usize,
    pub concepts_per_class: usize,
    pub variants_per_concept: usize,
    /// Concept-specific words in each canonical form; depression canonicals
    /// add one shared class word on top.
    pub canonical_words: usize,
    pub cannabis_concepts: usize,
    pub cannabis_variants: usize,
    pub topics: usize,
    pub words_per_topic: usize,
    pub min_fillers: usize,
    pub max_fillers: usize,
    /// Probability that a tweet carries one of its class's cue words.
    pub cue_probability: f64,
    pub cues_per_class: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_tweets: 300,
            n_unlabeled: 0,
            concepts_per_class: 40,
            variants_per_concept: 2,
            canonical_words: 3,
            cannabis_concepts: 20,
            cannabis_variants: 4,
            topics: 4,
            words_per_topic: 8,
            min_fillers: 4,
            max_fillers: 7,
            cue_probability: 0.5,
            cues_per_class: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub tweets: TweetCollection,
    pub lexicon: Lexicon,
}

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "gl", "kr", "pl", "st",
    "tr", "sk",
];
const NUCLEI: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou", "ee"];

/// Invented lowercase words, unique across the whole corpus.
struct WordSource<'a> {
    rng: &'a mut ChaCha8Rng,
    used: BTreeSet<String>,
}

impl WordSource<'_> {
    fn word(&mut self) -> String {
        loop {
            let syllables = self.rng.random_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS.choose(self.rng).expect("non-empty"));
                w.push_str(NUCLEI.choose(self.rng).expect("non-empty"));
            }
            if self.rng.random_bool(0.5) {
                w.push_str(["n", "x", "th", "m"].choose(self.rng).expect("non-empty"));
            }
            if !DEFAULT_STOPWORDS.contains(&w.as_str()) && self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    fn words(&mut self, n: usize) -> Vec<String> {
        (0..n).map(|_| self.word()).collect()
    }

    /// One- or two-word surface phrase.
    fn phrase(&mut self) -> String {
        if self.rng.random_bool(0.5) {
            self.word()
        } else {
            format!("{} {}", self.word(), self.word())
        }
    }
}

struct Concept {
    canonical: String,
    variants: Vec<String>,
}

pub fn generate(config: &SyntheticConfig) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut src = WordSource {
        rng: &mut rng,
        used: BTreeSet::new(),
    };

    let class_words = src.words(RelationLabel::ALL.len());
    let cues: Vec<Vec<String>> = (0..RelationLabel::ALL.len()).map(|_| src.words(config.cues_per_class)).collect();
    let depression: Vec<Vec<Concept>> = class_words
        .iter()
        .map(|cw| {
            (0..config.concepts_per_class)
                .map(|_| Concept {
                    canonical: format!("{cw} {}", src.words(config.canonical_words).join(" ")),
                    variants: (0..config.variants_per_concept).map(|_| src.phrase()).collect(),
                })
                .collect()
        })
        .collect();
    let cannabis: Vec<Concept> = (0..config.cannabis_concepts)
        .map(|_| Concept {
            canonical: src.words(config.canonical_words.max(1)).join(" "),
            variants: (0..config.cannabis_variants).map(|_| src.phrase()).collect(),
        })
        .collect();
    let topics: Vec<Vec<String>> = (0..config.topics).map(|_| src.words(config.words_per_topic)).collect();

    let mut entries = Vec::new();
    let tagged = cannabis
        .iter()
        .map(|c| (Category::Cannabis, c))
        .chain(depression.iter().flatten().map(|c| (Category::Depression, c)));
    for (category, c) in tagged {
        for v in &c.variants {
            entries.push(LexiconEntry {
                phrase: v.clone(),
                canonical: c.canonical.clone(),
                category,
                source: "synthetic".into(),
            });
        }
    }
    let lexicon = Lexicon::validated(entries).expect("generated phrases are unique and non-empty");

    let total = config.n_tweets + config.n_unlabeled;
    let mut tweets = Vec::with_capacity(total);
    for i in 0..total {
        let class = i % RelationLabel::ALL.len();
        let concept = depression[class].choose(&mut rng).expect("concepts_per_class > 0");
        let mut units: Vec<String> = vec![
            concept.variants.choose(&mut rng).expect("variants > 0").clone(),
            cannabis
                .choose(&mut rng)
                .and_then(|c| c.variants.choose(&mut rng))
                .expect("cannabis concepts > 0")
                .clone(),
        ];
        if rng.random_bool(config.cue_probability) {
            units.push(cues[class].choose(&mut rng).expect("cues > 0").clone());
        }
        let topic = topics.choose(&mut rng).expect("topics > 0");
        let n_fill = rng.random_range(config.min_fillers..=config.max_fillers);
        for _ in 0..n_fill {
            units.push(topic.choose(&mut rng).expect("topic words > 0").clone());
        }
        units.shuffle(&mut rng);
        tweets.push(Tweet {
            id: format!("syn{i:04}"),
            raw_text: units.join(" "),
            label: (i < config.n_tweets).then_some(RelationLabel::ALL[class]),
        });
    }
    SyntheticCorpus {
        tweets: TweetCollection::new(tweets).expect("ids are unique"),
        lexicon,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_and_seeded() {
        let cfg = SyntheticConfig::default();
        let a = generate(&cfg);
        let b = generate(&cfg);
        assert_eq!(a.tweets.to_jsonl(), b.tweets.to_jsonl());
        assert_eq!(a.tweets.len(), 300);
        for label in RelationLabel::ALL {
            assert_eq!(a.tweets.labeled().filter(|(_, l)| *l == label).count(), 100);
        }
        let other = generate(&SyntheticConfig { seed: 1, ..cfg });
        assert_ne!(a.tweets.to_jsonl(), other.tweets.to_jsonl());
    }

    #[test]
    fn lexicon_covers_both_categories() {
        let s = generate(&SyntheticConfig::default());
        assert_eq!(s.lexicon.phrases(Category::Cannabis).len(), 20 * 4);
        assert_eq!(s.lexicon.phrases(Category::Depression).len(), 3 * 40 * 2);
    }
}
