//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use kirelex::corpus::NormalizeConfig;
use kirelex::embedding::{EmbeddingProvider, EmbeddingVector};
use kirelex::evaluation::{ablation_run, stratified_split, AblationConfig, AblationReport};
use kirelex::labeler::LabelerConfig;
use kirelex::lexicon::{Category, Lexicon};
use kirelex::matcher::MatcherConfig;
use kirelex::metric::TrainConfig;
use kirelex::pipeline::assemble::prepare;
use kirelex::synthetic::{generate, SyntheticConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn vector(values: Vec<f64>) -> EmbeddingVector {
    EmbeddingVector::new(values).unwrap()
}

/// Plain textbook cosine; no clamping, no shared code with the library.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// `max(0, cos(a, n) - cos(a, p) + margin)`.
pub fn hinge(a: &[f64], p: &[f64], n: &[f64], margin: f64) -> f64 {
    (cosine(a, n) - cosine(a, p) + margin).max(0.0)
}

/// Mean silhouette over all points, straight from the definition.
pub fn silhouette(coords: &[[f64; 2]], labels: &[usize]) -> f64 {
    let n = coords.len();
    let clusters = labels.iter().copied().max().unwrap() + 1;
    let d = |i: usize, j: usize| ((coords[i][0] - coords[j][0]).powi(2) + (coords[i][1] - coords[j][1]).powi(2)).sqrt();
    let mut total = 0.0;
    for i in 0..n {
        let mean_to = |c: usize| {
            let members: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == c).collect();
            members.iter().map(|&j| d(i, j)).sum::<f64>() / members.len() as f64
        };
        let a = mean_to(labels[i]);
        let b = (0..clusters)
            .filter(|&c| c != labels[i])
            .map(mean_to)
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    total / n as f64
}

/// `clusters` isotropic Gaussian blobs; centre k sits at `separation * e_k`,
/// so centres are `separation * sqrt(2)` apart.
pub fn gaussian_clusters(
    seed: u64,
    clusters: usize,
    per_cluster: usize,
    dim: usize,
    sigma: f64,
    separation: f64,
) -> (Vec<EmbeddingVector>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for c in 0..clusters {
        for _ in 0..per_cluster {
            let mut v: Vec<f64> = (0..dim).map(|_| noise.sample(&mut rng)).collect();
            v[c] += separation;
            points.push(vector(v));
            labels.push(c);
        }
    }
    (points, labels)
}

/// Outcome of the exhaustive matcher oracle for one category.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMatch {
    pub ngram: String,
    pub phrase: String,
    pub start: usize,
    pub end: usize,
    pub sim: f64,
}

/// Scores every (n-gram, phrase) pair of one category and keeps the best one
/// at or above `tau` (higher similarity, longer n-gram, leftmost, smaller
/// phrase).
pub fn brute_force_best(
    tokens: &[String],
    lexicon: &Lexicon,
    category: Category,
    provider: &EmbeddingProvider,
    tau: f64,
    n_max: usize,
) -> Option<OracleMatch> {
    let mut all = Vec::new();
    for start in 0..tokens.len() {
        for end in start + 1..=(start + n_max).min(tokens.len()) {
            let ngram = tokens[start..end].join(" ");
            let nv = provider.embed(&ngram).unwrap();
            for entry in lexicon.entries().iter().filter(|e| e.category == category) {
                let sim = if ngram == entry.phrase {
                    1.0
                } else {
                    let pv = provider.embed(&entry.phrase).unwrap();
                    cosine(nv.values(), pv.values()).clamp(-1.0, 1.0)
                };
                if sim >= tau {
                    all.push(OracleMatch {
                        ngram: ngram.clone(),
                        phrase: entry.phrase.clone(),
                        start,
                        end,
                        sim,
                    });
                }
            }
        }
    }
    all.sort_by(|a, b| {
        b.sim
            .partial_cmp(&a.sim)
            .unwrap()
            .then((b.end - b.start).cmp(&(a.end - a.start)))
            .then(a.start.cmp(&b.start))
            .then(a.phrase.cmp(&b.phrase))
    });
    all.into_iter().next()
}

pub fn random_words(rng: &mut ChaCha8Rng, vocab: &[&str], n: usize) -> Vec<String> {
    (0..n).map(|_| vocab[rng.random_range(0..vocab.len())].to_string()).collect()
}

/// Hash provider and training settings used by the synthetic benchmark.
pub const BENCH_DIM: usize = 64;

pub fn bench_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        hidden_dim: 64,
        output_dim: 32,
        ..TrainConfig::default()
    }
}

/// Generates the 300-tweet synthetic corpus for `seed`, splits it 80/20 and
/// runs the standard ablation grid.
pub fn synthetic_benchmark(seed: u64) -> AblationReport {
    let corpus = generate(&SyntheticConfig {
        seed,
        ..SyntheticConfig::default()
    });
    let provider = EmbeddingProvider::hash(BENCH_DIM, seed);
    let prepared = prepare(
        &corpus.tweets,
        &corpus.lexicon,
        &provider,
        &MatcherConfig::default(),
        &NormalizeConfig::default(),
    )
    .unwrap();
    let (train_ids, heldout_ids) = stratified_split(&corpus.tweets, 0.8, seed);
    ablation_run(
        &prepared,
        &provider,
        &train_ids,
        &heldout_ids,
        &bench_train_config(seed),
        &LabelerConfig::default(),
        &AblationConfig::standard_grid(),
    )
    .unwrap()
}

const MATCH_VOCAB: &[&str] = &[
    "weed", "kush", "blunt", "stoned", "high", "sad", "numb", "empty", "tired", "lonely", "anxious", "hopeless",
    "night", "work", "music", "rain",
];

/// Random 10-phrase lexicon (five per category, one to three words).
pub fn random_lexicon(rng: &mut ChaCha8Rng) -> Lexicon {
    use kirelex::lexicon::LexiconEntry;
    let mut entries = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    while entries.len() < 10 {
        let n = rng.random_range(1..=3);
        let phrase = random_words(rng, MATCH_VOCAB, n).join(" ");
        if !seen.insert(phrase.clone()) {
            continue;
        }
        let category = if entries.len() < 5 { Category::Cannabis } else { Category::Depression };
        entries.push(LexiconEntry {
            canonical: format!("canon {}", entries.len()),
            phrase,
            category,
            source: "test".into(),
        });
    }
    Lexicon::validated(entries).unwrap()
}

/// Runs `match_phrases` on one random tweet and compares it with the
/// exhaustive oracle. Returns the number of categories matched (`None` for
/// an overlap error), or a description of the disagreement.
pub fn matcher_agrees(rng: &mut ChaCha8Rng, provider: &EmbeddingProvider, tau: f64) -> Result<Option<usize>, String> {
    use kirelex::corpus::TokenSequence;
    use kirelex::matcher::{match_phrases, MatchError};

    let lexicon = random_lexicon(rng);
    let len = rng.random_range(1..=12);
    let tokens = random_words(rng, MATCH_VOCAB, len);
    let tweet = TokenSequence::new("t", tokens.clone());
    let config = MatcherConfig {
        tau,
        ..MatcherConfig::default()
    };
    let want_c = brute_force_best(&tokens, &lexicon, Category::Cannabis, provider, tau, config.n_max);
    let want_d = brute_force_best(&tokens, &lexicon, Category::Depression, provider, tau, config.n_max);
    let overlap = match (&want_c, &want_d) {
        (Some(c), Some(d)) => c.start < d.end && d.start < c.end,
        _ => false,
    };
    let got = match_phrases(&tweet, &lexicon, provider, &config);
    let ctx = || format!("tokens {tokens:?}, lexicon {:?}", lexicon.entries());
    match got {
        Err(MatchError::OverlappingSpans { .. }) if overlap => Ok(None),
        Err(e) => Err(format!("unexpected error {e}; {}", ctx())),
        Ok(_) if overlap => Err(format!("expected an overlap error; {}", ctx())),
        Ok(rec) => {
            for (want, got) in [(&want_c, &rec.cannabis), (&want_d, &rec.depression)] {
                match (want, got) {
                    (None, None) => {}
                    (Some(w), Some(g)) => {
                        let same = w.ngram == g.ngram
                            && w.phrase == g.phrase
                            && (w.start, w.end) == (g.span.start, g.span.end)
                            && (w.sim - g.sim).abs() < 1e-12;
                        if !same {
                            return Err(format!("oracle {w:?} vs {g:?}; {}", ctx()));
                        }
                        if g.sim < tau {
                            return Err(format!("match below tau: {g:?}"));
                        }
                    }
                    _ => return Err(format!("oracle {want:?} vs {got:?}; {}", ctx())),
                }
            }
            Ok(Some(usize::from(rec.cannabis.is_some()) + usize::from(rec.depression.is_some())))
        }
    }
}

pub fn data_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

/// Writes a config into `dir` that reads the bundled sample data and
/// writes to `dir/out`.
pub fn write_sample_config(dir: &std::path::Path) -> std::path::PathBuf {
    let mut cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data_dir().join("sample_config.json")).unwrap()).unwrap();
    cfg["paths"]["tweets"] = data_dir().join("sample_tweets.jsonl").display().to_string().into();
    cfg["paths"]["lexicon"] = data_dir().join("sample_lexicon.jsonl").display().to_string().into();
    cfg["paths"]["output_dir"] = "out".into();
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

pub fn run_cli(config: &std::path::Path, args: &[&str], env: &[(&str, &str)]) -> std::process::Output {
    let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_kirelex"));
    cmd.arg("--config").arg(config).args(args).env_remove("KIRELEX_SEED").env("RUST_LOG", "warn");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

/// SHA-256 of every file in `dir`, keyed by file name.
pub fn hash_dir(dir: &std::path::Path) -> std::collections::BTreeMap<String, String> {
    use sha2::{Digest, Sha256};
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            let bytes = std::fs::read(e.path()).unwrap();
            (e.file_name().to_string_lossy().into_owned(), hex::encode(Sha256::digest(&bytes)))
        })
        .collect()
}
