//! Supervised contrastive metric learning over frozen embeddings.
//!
//! A small feed-forward head maps assembled tweet/phrase embeddings into a
//! space where tweets sharing a relation label sit close together. Training
//! minimizes the cosine triplet hinge over (anchor, positive, negative)
//! triples drawn from the labeled examples. Gradients are derived by hand and
//! checked against central finite differences in [`gradcheck`].

pub mod checkpoint;
pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod train;
pub mod triplets;

use thiserror::Error;

use crate::corpus::RelationLabel;
use crate::embedding::{EmbeddingError, EmbeddingVector};

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use gradcheck::{gradient_check, loss_and_gradient};
pub use loss::triplet_loss;
pub use model::{Activation, MetricModel};
pub use train::{build_triplets, train, OptimizerKind, TrainConfig, TrainHistory};
pub use triplets::Triplet;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("zero-norm representation")]
    ZeroNorm,
    #[error("single-class dataset: triplets need at least two labels")]
    SingleClass,
    #[error("no triplets could be built")]
    NoTriplets,
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("hinge inactive: loss is zero, gradient check is vacuous")]
    HingeInactive,
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// One training or query example: the assembled model input for a tweet.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleVector {
    pub tweet_id: String,
    pub input: EmbeddingVector,
    pub label: RelationLabel,
}
