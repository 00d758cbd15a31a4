//! Precision / recall / F1, confusion matrices and component ablations.

pub mod ablation;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::RelationLabel;

pub use crate::corpus::stratified_split;
pub use ablation::{ablation_run, AblationConfig, AblationReport, AblationRow};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gold set is empty")]
    EmptyGold,
    #[error("no predictions to score")]
    EmptyPredictions,
    #[error("predicted id {0:?} has no gold label")]
    UnknownId(String),
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision == recall {
        return precision;
    }
    if precision + recall == 0.0 {
        return 0.0;
    }
    2.0 * precision * recall / (precision + recall)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold examples of this class.
    pub support: usize,
    pub predicted: usize,
    /// No predictions for this class; precision was scored as 0.
    pub precision_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: BTreeMap<RelationLabel, ClassReport>,
    /// Unweighted mean over classes present in the gold labels.
    #[serde(rename = "macro")]
    pub macro_avg: Scores,
    pub micro: Scores,
    pub accuracy: f64,
    /// Rows are gold labels, columns predictions, both in reason/effect/addiction order.
    pub confusion: [[usize; 3]; 3],
    pub n: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores `predictions` against `gold` over the predicted ids.
pub fn evaluate(
    predictions: &BTreeMap<String, RelationLabel>,
    gold: &BTreeMap<String, RelationLabel>,
) -> Result<EvalReport, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    if predictions.is_empty() {
        return Err(EvalError::EmptyPredictions);
    }
    let mut confusion = [[0usize; 3]; 3];
    for (id, pred) in predictions {
        let truth = gold.get(id).ok_or_else(|| EvalError::UnknownId(id.clone()))?;
        confusion[truth.index()][pred.index()] += 1;
    }
    let n = predictions.len();
    let mut per_class = BTreeMap::new();
    let mut macro_sum = (0.0, 0.0, 0.0);
    let mut present = 0usize;
    let mut correct = 0usize;
    for label in RelationLabel::ALL {
        let i = label.index();
        let tp = confusion[i][i];
        let support: usize = confusion[i].iter().sum();
        let predicted: usize = confusion.iter().map(|row| row[i]).sum();
        correct += tp;
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = f1_score(precision, recall);
        if support > 0 {
            present += 1;
            macro_sum.0 += precision;
            macro_sum.1 += recall;
            macro_sum.2 += f1;
        }
        per_class.insert(
            label,
            ClassReport {
                precision,
                recall,
                f1,
                support,
                predicted,
                precision_undefined: predicted == 0,
            },
        );
    }
    let k = present as f64;
    // Single-label data: pooled false positives equal pooled false negatives.
    let micro_p = ratio(correct, n);
    Ok(EvalReport {
        per_class,
        macro_avg: Scores {
            precision: macro_sum.0 / k,
            recall: macro_sum.1 / k,
            f1: macro_sum.2 / k,
        },
        micro: Scores {
            precision: micro_p,
            recall: micro_p,
            f1: f1_score(micro_p, micro_p),
        },
        accuracy: ratio(correct, n),
        confusion,
        n,
    })
}

impl EvalReport {
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>9} {:>9} {:>9} {:>8}", "class", "precision", "recall", "f1", "support");
        for (label, c) in &self.per_class {
            let _ = writeln!(
                out,
                "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>8}{}",
                label.as_str(),
                c.precision,
                c.recall,
                c.f1,
                c.support,
                if c.precision_undefined { "  (no predictions)" } else { "" }
            );
        }
        for (name, s) in [("macro", &self.macro_avg), ("micro", &self.micro)] {
            let _ = writeln!(
                out,
                "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>8}",
                name, s.precision, s.recall, s.f1, self.n
            );
        }
        let _ = writeln!(out, "confusion (rows gold, cols predicted; reason/effect/addiction):");
        for row in &self.confusion {
            let _ = writeln!(out, "  {:>5} {:>5} {:>5}", row[0], row[1], row[2]);
        }
        out
    }
}
