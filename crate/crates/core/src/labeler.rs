//! Weak labeling by k-nearest-neighbour vote in the learned space.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::RelationLabel;
use crate::embedding::{cosine_similarity, EmbeddingError, EmbeddingVector};

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("k = {k} exceeds the {labeled} labeled example(s)")]
    KTooLarge { k: usize, labeled: usize },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelerConfig {
    pub k: usize,
}

impl Default for LabelerConfig {
    fn default() -> Self {
        Self { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakLabel {
    #[serde(rename = "id")]
    pub tweet_id: String,
    pub label: RelationLabel,
    /// Fraction of the k neighbours that voted for `label`.
    pub confidence: f64,
    #[serde(rename = "neighbors")]
    pub neighbor_ids: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct LabeledPoint {
    pub id: String,
    pub representation: EmbeddingVector,
    pub label: RelationLabel,
}

/// Cosine distance `1 - cos(u, v)`.
pub fn cosine_distance(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    Ok(1.0 - cosine_similarity(u, v)?)
}

/// Labels one query point. Neighbours are ranked by distance, then by id;
/// the plurality label wins and ties go to the label of the nearest
/// neighbour among the tied labels.
pub fn knn_label_one(
    query_id: &str,
    query: &EmbeddingVector,
    labeled: &[LabeledPoint],
    config: &LabelerConfig,
) -> Result<WeakLabel, LabelError> {
    let k = config.k;
    if k == 0 {
        return Err(LabelError::ZeroK);
    }
    if k > labeled.len() {
        return Err(LabelError::KTooLarge {
            k,
            labeled: labeled.len(),
        });
    }
    let mut ranked: Vec<(f64, &LabeledPoint)> = labeled
        .iter()
        .map(|p| Ok((cosine_distance(query, &p.representation)?, p)))
        .collect::<Result<_, EmbeddingError>>()?;
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
    ranked.truncate(k);

    let mut votes = [0usize; 3];
    for (_, p) in &ranked {
        votes[p.label.index()] += 1;
    }
    let top = *votes.iter().max().expect("three labels");
    let label = ranked
        .iter()
        .map(|(_, p)| p.label)
        .find(|l| votes[l.index()] == top)
        .expect("a neighbour carries the top label");
    Ok(WeakLabel {
        tweet_id: query_id.to_string(),
        label,
        confidence: top as f64 / k as f64,
        neighbor_ids: ranked.iter().map(|(_, p)| p.id.clone()).collect(),
    })
}

pub fn knn_label(
    labeled: &[LabeledPoint],
    unlabeled: &[(String, EmbeddingVector)],
    config: &LabelerConfig,
) -> Result<Vec<WeakLabel>, LabelError> {
    unlabeled
        .iter()
        .map(|(id, v)| knn_label_one(id, v, labeled, config))
        .collect()
}
