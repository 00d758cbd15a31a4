//! Lexicon-guided relation extraction between cannabis and depression
//! mentions in tweets.
//!
//! The pipeline normalizes tweets ([`corpus`]), finds one cannabis and one
//! depression phrase per tweet by embedding similarity against a curated
//! [`lexicon`] ([`matcher`]), learns a triplet-loss projection over the
//! resulting embeddings ([`metric`]), and weak-labels unlabeled tweets by
//! nearest-neighbour vote ([`labeler`]). [`evaluation`] scores predictions and
//! runs component ablations; [`viz`] projects representations to 2-D.

// `!(x > 0.0)` is intended: NaN must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod embedding;
pub mod lexicon;
pub mod matcher;
pub mod metric;
pub mod labeler;
pub mod evaluation;
pub mod pipeline;
pub mod synthetic;
pub mod viz;
