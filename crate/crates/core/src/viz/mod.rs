//! 2D projections of learned representations and scatter-plot output.

pub mod pca;
pub mod plot;
pub mod tsne;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::RelationLabel;
use crate::embedding::EmbeddingVector;

pub use pca::{pca_2d, PcaProjection};
pub use plot::{emit_plot, render_csv, render_svg, PlotFormat};
pub use tsne::{calibrate_affinities, tsne_2d, TsneConfig, TsneProjection};

#[derive(Debug, Error)]
pub enum VizError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("degenerate input: all points are identical")]
    Degenerate,
    #[error("invalid projection config: {0}")]
    InvalidConfig(String),
    #[error("nothing to plot")]
    Empty,
    #[error("plot i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMethod {
    Pca,
    Tsne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectionConfig {
    pub method: ProjectionMethod,
    pub seed: u64,
    pub tsne_perplexity: f64,
    pub tsne_iters: usize,
    pub tsne_learning_rate: f64,
    pub tsne_early_exaggeration: f64,
    pub tsne_exaggeration_iters: usize,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            method: ProjectionMethod::Tsne,
            seed: 0,
            tsne_perplexity: 30.0,
            tsne_iters: 1000,
            tsne_learning_rate: 200.0,
            tsne_early_exaggeration: 12.0,
            tsne_exaggeration_iters: 250,
        }
    }
}

impl ProjectionConfig {
    pub fn tsne(&self) -> TsneConfig {
        TsneConfig {
            perplexity: self.tsne_perplexity,
            iters: self.tsne_iters,
            learning_rate: self.tsne_learning_rate,
            early_exaggeration: self.tsne_early_exaggeration,
            exaggeration_iters: self.tsne_exaggeration_iters,
            seed: self.seed,
        }
    }
}

/// Label attached to a plotted point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PointLabel {
    Relation(RelationLabel),
    Unlabeled,
}

impl PointLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PointLabel::Relation(l) => l.as_str(),
            PointLabel::Unlabeled => "unlabeled",
        }
    }
}

impl From<Option<RelationLabel>> for PointLabel {
    fn from(l: Option<RelationLabel>) -> Self {
        l.map_or(PointLabel::Unlabeled, PointLabel::Relation)
    }
}

impl fmt::Display for PointLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for PointLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for PointLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "unlabeled" {
            return Ok(PointLabel::Unlabeled);
        }
        s.parse().map(PointLabel::Relation).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    #[serde(rename = "id")]
    pub tweet_id: String,
    pub x: f64,
    pub y: f64,
    pub label: PointLabel,
}

/// Checks shape preconditions and returns the common dimension.
pub(crate) fn check_points(points: &[EmbeddingVector]) -> Result<usize, VizError> {
    if points.len() < 3 {
        return Err(VizError::TooFewPoints(points.len()));
    }
    let dim = points[0].dim();
    for p in points {
        if p.dim() != dim {
            return Err(VizError::DimensionMismatch {
                expected: dim,
                actual: p.dim(),
            });
        }
    }
    Ok(dim)
}

/// Projects labeled representations to 2D. One point per input, in order.
pub fn project_2d(
    items: &[(String, EmbeddingVector, PointLabel)],
    config: &ProjectionConfig,
) -> Result<Vec<ProjectedPoint>, VizError> {
    let vectors: Vec<EmbeddingVector> = items.iter().map(|(_, v, _)| v.clone()).collect();
    let coords = match config.method {
        ProjectionMethod::Pca => {
            let p = pca_2d(&vectors)?;
            if p.zero_variance {
                log::warn!("PCA input has zero variance; all points project to the origin");
            }
            p.coords
        }
        ProjectionMethod::Tsne => tsne_2d(&vectors, &config.tsne())?.coords,
    };
    Ok(items
        .iter()
        .zip(coords)
        .map(|((id, _, label), [x, y])| ProjectedPoint {
            tweet_id: id.clone(),
            x,
            y,
            label: *label,
        })
        .collect())
}
