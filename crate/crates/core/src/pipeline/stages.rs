//! File-backed stages. Each stage reads the previous stages' artifacts from
//! the output directory, so `pipeline` is exactly the stages run in order.
//!
//! JSON artifacts carry the config hash in a leading `_meta` line (JSONL) or
//! a `config_hash` field (JSON); the SVG carries it in a comment. CSV and the
//! binary checkpoint keep their plain formats and are covered by the
//! checksums in `manifest.json`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::assemble::{self, InputMode, PreparedTweet, RelationClassifier};
use super::{PipelineConfig, PipelineError};
use crate::corpus::{load_tweets, stratified_split, tokenize, InputFormat, RelationLabel, TweetCollection};
use crate::embedding::EmbeddingProvider;
use crate::evaluation::{ablation_run, evaluate};
use crate::lexicon::load_lexicon;
use crate::matcher::PhraseMatchRecord;
use crate::metric::{load_checkpoint, save_checkpoint, train};
use crate::viz::{emit_plot, project_2d, PlotFormat, PointLabel};

pub const MATCHES_FILE: &str = "matches.jsonl";
pub const CHECKPOINT_FILE: &str = "model.kirx";
pub const HISTORY_FILE: &str = "history.json";
pub const WEAK_LABELS_FILE: &str = "weak_labels.jsonl";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const ABLATION_FILE: &str = "ablation.json";
pub const PROJECTION_CSV: &str = "projection.csv";
pub const PROJECTION_SVG: &str = "projection.svg";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Match,
    Train,
    Label,
    Eval,
    Ablate,
    Project,
    Pipeline,
}

impl Stage {
    /// Stages run by `pipeline`, in order.
    pub const SEQUENCE: [Stage; 6] = [
        Stage::Match,
        Stage::Train,
        Stage::Label,
        Stage::Eval,
        Stage::Ablate,
        Stage::Project,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Match => "match",
            Stage::Train => "train",
            Stage::Label => "label",
            Stage::Eval => "eval",
            Stage::Ablate => "ablate",
            Stage::Project => "project",
            Stage::Pipeline => "pipeline",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::SEQUENCE
            .into_iter()
            .chain([Stage::Pipeline])
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

/// A stage failure, tagged with the stage that raised it.
#[derive(Debug, thiserror::Error)]
#[error("stage {stage}: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: PipelineError,
}

/// Optional inputs for `eval`; both default to the pipeline's own files.
#[derive(Debug, Clone, Default)]
pub struct EvalInputs {
    pub predictions: Option<PathBuf>,
    pub gold: Option<PathBuf>,
}

/// Runs one stage (or all of them for [`Stage::Pipeline`]) and returns the
/// artifact paths written.
pub fn run_stage(stage: Stage, config: &PipelineConfig, eval: &EvalInputs) -> Result<Vec<PathBuf>, StageError> {
    if stage == Stage::Pipeline {
        let mut all = Vec::new();
        for s in Stage::SEQUENCE {
            all.extend(run_stage(s, config, &EvalInputs::default())?);
        }
        return Ok(all);
    }
    let wrap = |source| StageError { stage, source };
    let mut ctx = Context::new(config).map_err(wrap)?;
    let written = match stage {
        Stage::Match => ctx.match_stage(),
        Stage::Train => ctx.train_stage(),
        Stage::Label => ctx.label_stage(),
        Stage::Eval => ctx.eval_stage(eval),
        Stage::Ablate => ctx.ablate_stage(),
        Stage::Project => ctx.project_stage(),
        Stage::Pipeline => unreachable!(),
    }
    .map_err(wrap)?;
    update_manifest(config, &written).map_err(wrap)?;
    Ok(written)
}

struct Context<'a> {
    config: &'a PipelineConfig,
    hash: String,
    out: PathBuf,
    provider: Option<EmbeddingProvider>,
}

fn meta(hash: &str, stage: Stage) -> Value {
    json!({"_meta": {"config_hash": hash, "stage": stage.as_str()}})
}

fn write_file(path: &Path, body: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    fs::write(path, body).map_err(|e| PipelineError::io(path, e))
}

fn write_jsonl<T: Serialize>(path: &Path, meta: &Value, rows: &[T]) -> Result<(), PipelineError> {
    let mut body = serde_json::to_string(meta).expect("meta serializes");
    body.push('\n');
    for r in rows {
        body.push_str(&serde_json::to_string(r).expect("row serializes"));
        body.push('\n');
    }
    write_file(path, body)
}

fn write_json(path: &Path, value: &Value) -> Result<(), PipelineError> {
    let mut body = serde_json::to_string_pretty(value).expect("value serializes");
    body.push('\n');
    write_file(path, body)
}

/// Parses a JSONL artifact, skipping `_meta` lines.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|e| PipelineError::Artifact {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", i + 1),
        })?;
        if value.get("_meta").is_some() {
            continue;
        }
        rows.push(serde_json::from_value(value).map_err(|e| PipelineError::Artifact {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", i + 1),
        })?);
    }
    Ok(rows)
}

#[derive(Deserialize)]
struct IdLabel {
    id: String,
    label: Option<RelationLabel>,
}

/// Reads `id -> label` pairs from any JSONL file with `id` and `label`
/// fields; rows without a label are ignored.
pub fn read_id_labels(path: &Path) -> Result<BTreeMap<String, RelationLabel>, PipelineError> {
    let rows: Vec<IdLabel> = read_jsonl(path)?;
    let mut out = BTreeMap::new();
    for r in rows {
        if let Some(label) = r.label {
            if out.insert(r.id.clone(), label).is_some() {
                return Err(PipelineError::Artifact {
                    path: path.to_path_buf(),
                    message: format!("duplicate id {:?}", r.id),
                });
            }
        }
    }
    Ok(out)
}

fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Records checksums of freshly written artifacts. Entries from a run with a
/// different config are dropped.
fn update_manifest(config: &PipelineConfig, written: &[PathBuf]) -> Result<(), PipelineError> {
    let hash = config.hash();
    let path = config.paths.output_dir.join(MANIFEST_FILE);
    let mut artifacts: BTreeMap<String, String> = BTreeMap::new();
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(old) = serde_json::from_str::<Value>(&text) {
            if old["config_hash"] == hash.as_str() {
                if let Ok(a) = serde_json::from_value(old["artifacts"].clone()) {
                    artifacts = a;
                }
            }
        }
    }
    for p in written {
        let name = p
            .strip_prefix(&config.paths.output_dir)
            .unwrap_or(p)
            .to_string_lossy()
            .into_owned();
        artifacts.insert(name, sha256_file(p)?);
    }
    write_json(
        &path,
        &json!({
            "config_hash": hash,
            "config": config,
            "artifacts": artifacts,
        }),
    )
}

impl<'a> Context<'a> {
    fn new(config: &'a PipelineConfig) -> Result<Self, PipelineError> {
        let out = config.paths.output_dir.clone();
        fs::create_dir_all(&out).map_err(|e| PipelineError::io(&out, e))?;
        Ok(Self {
            config,
            hash: config.hash(),
            out,
            provider: None,
        })
    }

    fn provider(&mut self) -> Result<&EmbeddingProvider, PipelineError> {
        if self.provider.is_none() {
            self.provider = Some(self.config.build_provider()?);
        }
        Ok(self.provider.as_ref().expect("just set"))
    }

    fn corpus(&self) -> Result<TweetCollection, PipelineError> {
        Ok(load_tweets(&self.config.paths.tweets, InputFormat::JsonLines)?)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Joins the corpus with the match records written by `match`.
    fn prepared(&self, corpus: &TweetCollection) -> Result<Vec<PreparedTweet>, PipelineError> {
        let path = self.path(MATCHES_FILE);
        if !path.is_file() {
            return Err(PipelineError::Config(format!(
                "{} not found; run the match stage first",
                path.display()
            )));
        }
        let records: Vec<PhraseMatchRecord> = read_jsonl(&path)?;
        let mut by_id: BTreeMap<String, PhraseMatchRecord> =
            records.into_iter().map(|r| (r.tweet_id.clone(), r)).collect();
        let mut tokens = Vec::with_capacity(corpus.len());
        let mut ordered = Vec::with_capacity(corpus.len());
        for t in &corpus.tweets {
            let record = by_id.remove(&t.id).ok_or_else(|| PipelineError::Artifact {
                path: path.clone(),
                message: format!("no match record for tweet {:?}", t.id),
            })?;
            tokens.push(tokenize(t, &self.config.normalize));
            ordered.push(record);
        }
        Ok(assemble::join(corpus, tokens, ordered))
    }

    fn split(&self, corpus: &TweetCollection) -> (Vec<String>, Vec<String>) {
        stratified_split(corpus, self.config.train_fraction, self.config.seed)
    }

    fn match_stage(&mut self) -> Result<Vec<PathBuf>, PipelineError> {
        let corpus = self.corpus()?;
        let lexicon = load_lexicon(&self.config.paths.lexicon)?;
        let prepared = {
            let config = self.config;
            let provider = self.provider()?;
            assemble::prepare(&corpus, &lexicon, provider, &config.matcher, &config.normalize)?
        };
        let records: Vec<&PhraseMatchRecord> = prepared.iter().map(|p| &p.record).collect();
        let matched = records.iter().filter(|r| r.is_matched()).count();
        log::info!("matched both phrases in {matched} of {} tweets", records.len());
        let path = self.path(MATCHES_FILE);
        write_jsonl(&path, &meta(&self.hash, Stage::Match), &records)?;
        Ok(vec![path])
    }

    fn train_stage(&mut self) -> Result<Vec<PathBuf>, PipelineError> {
        let corpus = self.corpus()?;
        let prepared = self.prepared(&corpus)?;
        let (train_ids, _) = self.split(&corpus);
        let config = self.config;
        let examples = assemble::training_examples(&prepared, &train_ids, self.provider()?, InputMode::Knowledge)?;
        if examples.is_empty() {
            return Err(PipelineError::Config(
                "no labeled training tweet matched both a cannabis and a depression phrase".into(),
            ));
        }
        log::info!("training on {} examples", examples.len());
        let (model, history) = train(&examples, &config.train)?;
        let ckpt = config.checkpoint_path();
        save_checkpoint(&model, &ckpt)?;
        let hist = self.path(HISTORY_FILE);
        write_json(
            &hist,
            &json!({
                "config_hash": self.hash,
                "train_examples": examples.len(),
                "input_dim": model.input_dim,
                "history": history,
            }),
        )?;
        Ok(vec![ckpt, hist])
    }

    /// The trained classifier indexed over the training split.
    fn classifier(&mut self, prepared: &[PreparedTweet], train_ids: &[String]) -> Result<RelationClassifier, PipelineError> {
        let model = load_checkpoint(&self.config.checkpoint_path())?;
        let examples = assemble::training_examples(prepared, train_ids, self.provider()?, InputMode::Knowledge)?;
        RelationClassifier::new(Some(model), InputMode::Knowledge, &examples)
    }

    fn label_stage(&mut self) -> Result<Vec<PathBuf>, PipelineError> {
        let corpus = self.corpus()?;
        let prepared = self.prepared(&corpus)?;
        let (train_ids, heldout_ids) = self.split(&corpus);
        let classifier = self.classifier(&prepared, &train_ids)?;
        let unlabeled: Vec<&PreparedTweet> = prepared.iter().filter(|t| t.label.is_none()).collect();
        let heldout: Vec<&PreparedTweet> = prepared
            .iter()
            .filter(|t| t.label.is_some() && heldout_ids.contains(&t.id))
            .collect();
        let config = self.config;
        let provider = self.provider()?;
        let weak = classifier.label(&unlabeled, provider, &config.labeler)?;
        let predictions = classifier.label(&heldout, provider, &config.labeler)?;
        let weak_path = self.path(WEAK_LABELS_FILE);
        let pred_path = self.path(PREDICTIONS_FILE);
        write_jsonl(&weak_path, &meta(&self.hash, Stage::Label), &weak)?;
        write_jsonl(&pred_path, &meta(&self.hash, Stage::Label), &predictions)?;
        Ok(vec![weak_path, pred_path])
    }

    fn eval_stage(&mut self, inputs: &EvalInputs) -> Result<Vec<PathBuf>, PipelineError> {
        let pred_path = inputs.predictions.clone().unwrap_or_else(|| self.path(PREDICTIONS_FILE));
        let gold_path = inputs.gold.clone().unwrap_or_else(|| self.config.paths.tweets.clone());
        let predictions = read_id_labels(&pred_path)?;
        let gold = read_id_labels(&gold_path)?;
        let report = evaluate(&predictions, &gold)?;
        log::info!("macro F1 {:.4}", report.macro_avg.f1);
        let path = self.path(REPORT_FILE);
        write_json(
            &path,
            &json!({
                "config_hash": self.hash,
                "report": report,
                "table": report.render_table(),
            }),
        )?;
        Ok(vec![path])
    }

    fn ablate_stage(&mut self) -> Result<Vec<PathBuf>, PipelineError> {
        let corpus = self.corpus()?;
        let prepared = self.prepared(&corpus)?;
        let (train_ids, heldout_ids) = self.split(&corpus);
        let config = self.config;
        let report = ablation_run(
            &prepared,
            self.provider()?,
            &train_ids,
            &heldout_ids,
            &config.train,
            &config.labeler,
            &config.ablation,
        )?;
        let path = self.path(ABLATION_FILE);
        write_json(
            &path,
            &json!({
                "config_hash": self.hash,
                "ablation": report,
                "table": report.render_table(),
            }),
        )?;
        Ok(vec![path])
    }

    fn project_stage(&mut self) -> Result<Vec<PathBuf>, PipelineError> {
        let corpus = self.corpus()?;
        let prepared = self.prepared(&corpus)?;
        let model = load_checkpoint(&self.config.checkpoint_path())?;
        let provider = self.provider()?;
        let items = prepared
            .iter()
            .map(|t| {
                let input = assemble::assemble_input(t, provider, InputMode::Knowledge)?;
                Ok((t.id.clone(), assemble::represent(Some(&model), &input)?, PointLabel::from(t.label)))
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        let points = project_2d(&items, &self.config.projection)?;
        let csv = self.path(PROJECTION_CSV);
        let svg = self.path(PROJECTION_SVG);
        let comment = format!("config_hash {}", self.hash);
        emit_plot(&points, &csv, PlotFormat::Csv, None)?;
        emit_plot(&points, &svg, PlotFormat::Svg, Some(&comment))?;
        Ok(vec![csv, svg])
    }
}
