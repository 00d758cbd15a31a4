//! Component ablations: rerun fit/predict with knowledge matching and/or the
//! contrastive head switched off and compare against the full model.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{evaluate, EvalReport};
use crate::corpus::RelationLabel;
use crate::embedding::EmbeddingProvider;
use crate::labeler::LabelerConfig;
use crate::metric::TrainConfig;
use crate::pipeline::assemble::{
    predictions_map, training_examples, InputMode, PreparedTweet, RelationClassifier,
};
use crate::pipeline::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub use_knowledge_matching: bool,
    pub use_contrastive: bool,
}

impl AblationConfig {
    pub const FULL: Self = Self {
        use_knowledge_matching: true,
        use_contrastive: true,
    };
    pub const NO_CONTRASTIVE: Self = Self {
        use_knowledge_matching: true,
        use_contrastive: false,
    };
    /// Knowledge infusion removed on top of the contrastive loss.
    pub const NO_KNOWLEDGE: Self = Self {
        use_knowledge_matching: false,
        use_contrastive: false,
    };

    /// The standard grid: full model, then components removed one after another.
    pub fn standard_grid() -> Vec<Self> {
        vec![Self::FULL, Self::NO_CONTRASTIVE, Self::NO_KNOWLEDGE]
    }

    pub fn is_full(&self) -> bool {
        *self == Self::FULL
    }

    pub fn row_name(&self) -> &'static str {
        match (self.use_knowledge_matching, self.use_contrastive) {
            (true, true) => "full model",
            (true, false) => "(-) contrastive learning loss",
            (false, _) => "(-) knowledge infusion",
        }
    }

    pub fn input_mode(&self) -> InputMode {
        if self.use_knowledge_matching {
            InputMode::Knowledge
        } else {
            InputMode::WholeTweet
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub config: AblationConfig,
    /// `None` when this configuration failed; see `error`.
    pub report: Option<EvalReport>,
    pub error: Option<String>,
    /// Macro P/R/F1 minus the full model's (negative means worse).
    pub delta_macro: Option<[f64; 3]>,
    pub train_examples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub heldout: usize,
}

impl AblationReport {
    pub fn row(&self, config: AblationConfig) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.config == config)
    }

    pub fn macro_f1(&self, config: AblationConfig) -> Option<f64> {
        self.row(config)?.report.as_ref().map(|r| r.macro_avg.f1)
    }

    pub fn render_table(&self) -> String {
        let mut out = format!(
            "{:<32} {:>9} {:>9} {:>9} {:>9}\n",
            "model", "precision", "recall", "f1", "delta f1"
        );
        for row in &self.rows {
            match (&row.report, &row.error) {
                (Some(r), _) => out.push_str(&format!(
                    "{:<32} {:>9.4} {:>9.4} {:>9.4} {:>+9.4}\n",
                    row.name,
                    r.macro_avg.precision,
                    r.macro_avg.recall,
                    r.macro_avg.f1,
                    row.delta_macro.map_or(f64::NAN, |d| d[2])
                )),
                (None, err) => out.push_str(&format!(
                    "{:<32} failed: {}\n",
                    row.name,
                    err.as_deref().unwrap_or("unknown")
                )),
            }
        }
        out
    }
}

/// Fits on `train_ids` and scores the labeled tweets in `heldout_ids`, once
/// per configuration. A failing configuration is recorded in its row and does
/// not stop the others.
pub fn ablation_run(
    tweets: &[PreparedTweet],
    provider: &EmbeddingProvider,
    train_ids: &[String],
    heldout_ids: &[String],
    train_config: &TrainConfig,
    labeler: &LabelerConfig,
    grid: &[AblationConfig],
) -> Result<AblationReport, PipelineError> {
    let heldout_set: std::collections::HashSet<&str> =
        heldout_ids.iter().map(String::as_str).collect();
    let heldout: Vec<&PreparedTweet> = tweets
        .iter()
        .filter(|t| t.label.is_some() && heldout_set.contains(t.id.as_str()))
        .collect();
    if heldout.is_empty() {
        return Err(PipelineError::Config("held-out split has no labeled tweets".into()));
    }
    let gold: BTreeMap<String, RelationLabel> = heldout
        .iter()
        .map(|t| (t.id.clone(), t.label.expect("filtered")))
        .collect();

    let mut rows = Vec::with_capacity(grid.len());
    for cfg in grid {
        let mode = cfg.input_mode();
        let mut train_examples = 0;
        let outcome = (|| {
            let examples = training_examples(tweets, train_ids, provider, mode)?;
            train_examples = examples.len();
            let (classifier, _) =
                RelationClassifier::fit(&examples, mode, cfg.use_contrastive, train_config)?;
            let labels = classifier.label(&heldout, provider, labeler)?;
            Ok::<_, PipelineError>(evaluate(&predictions_map(&labels), &gold)?)
        })();
        let (report, error) = match outcome {
            Ok(r) => (Some(r), None),
            Err(e) => {
                log::warn!("ablation row {:?} failed: {e}", cfg.row_name());
                (None, Some(e.to_string()))
            }
        };
        rows.push(AblationRow {
            name: cfg.row_name().to_string(),
            config: *cfg,
            report,
            error,
            delta_macro: None,
            train_examples,
        });
    }

    let full = rows
        .iter()
        .find(|r| r.config.is_full())
        .and_then(|r| r.report.as_ref())
        .map(|r| r.macro_avg);
    if let Some(full) = full {
        for row in &mut rows {
            if let Some(r) = &row.report {
                row.delta_macro = Some([
                    r.macro_avg.precision - full.precision,
                    r.macro_avg.recall - full.recall,
                    r.macro_avg.f1 - full.f1,
                ]);
            }
        }
    }
    Ok(AblationReport {
        rows,
        heldout: heldout.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_names() {
        let names: Vec<_> = AblationConfig::standard_grid().iter().map(|c| c.row_name()).collect();
        assert_eq!(
            names,
            ["full model", "(-) contrastive learning loss", "(-) knowledge infusion"]
        );
        let partial = AblationConfig {
            use_knowledge_matching: false,
            use_contrastive: true,
        };
        assert_eq!(partial.row_name(), "(-) knowledge infusion");
    }
}
