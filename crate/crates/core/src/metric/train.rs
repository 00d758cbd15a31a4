use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::triplet_loss_grad;
use super::model::{Activation, ForwardTrace, MetricModel};
use super::triplets::{sample_triplets, Triplet};
use super::{ExampleVector, MetricError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub margin: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub triplets_per_anchor: usize,
    /// Use every valid (positive, negative) pair instead of sampling.
    pub exhaustive_triplets: bool,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            margin: 0.2,
            learning_rate: 1e-3,
            epochs: 50,
            triplets_per_anchor: 4,
            exhaustive_triplets: false,
            batch_size: 32,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            hidden_dim: 256,
            output_dim: 128,
            activation: Activation::Tanh,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MetricError> {
        let bad = |m: &str| Err(MetricError::InvalidConfig(m.to_string()));
        if !(self.margin > 0.0) {
            return bad("margin must be > 0");
        }
        // Zero is allowed: it leaves the initialization untouched.
        if !(self.learning_rate >= 0.0) {
            return bad("learning_rate must be >= 0");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size == 0 || self.hidden_dim == 0 || self.output_dim == 0 {
            return bad("batch_size, hidden_dim and output_dim must be positive");
        }
        if !self.exhaustive_triplets && self.triplets_per_anchor == 0 {
            return bad("triplets_per_anchor must be positive");
        }
        Ok(())
    }

    fn per_anchor(&self) -> Option<usize> {
        (!self.exhaustive_triplets).then_some(self.triplets_per_anchor)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean triplet loss per epoch, measured before each batch's update.
    pub epoch_loss: Vec<f64>,
    pub triplets_per_epoch: Vec<usize>,
}

impl TrainHistory {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_loss.last().copied()
    }
}

pub fn build_triplets(
    examples: &[ExampleVector],
    config: &TrainConfig,
    seed: u64,
) -> Result<Vec<Triplet>, MetricError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_triplets(examples, config.per_anchor(), &mut rng)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], c: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - c.beta1.powi(self.t);
        let bc2 = 1.0 - c.beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            *p -= c.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + c.epsilon);
        }
    }
}

/// Mean loss and parameter gradient over a batch of triplets.
///
/// Each distinct example is forwarded and backpropagated once; examples are
/// visited in index order so the accumulation is reproducible.
pub(crate) fn batch_loss_grad(
    model: &MetricModel,
    inputs: &[&[f64]],
    batch: &[Triplet],
    margin: f64,
) -> Result<(f64, Vec<f64>), MetricError> {
    let mut traces: BTreeMap<usize, ForwardTrace> = BTreeMap::new();
    for t in batch {
        for idx in [t.anchor, t.positive, t.negative] {
            if let std::collections::btree_map::Entry::Vacant(e) = traces.entry(idx) {
                e.insert(model.trace(inputs[idx])?);
            }
        }
    }
    let scale = 1.0 / batch.len() as f64;
    let mut d_out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut loss = 0.0;
    for t in batch {
        let g = triplet_loss_grad(
            &traces[&t.anchor].output,
            &traces[&t.positive].output,
            &traces[&t.negative].output,
            margin,
        )?;
        loss += g.loss;
        if g.loss == 0.0 {
            continue;
        }
        for (idx, d) in [(t.anchor, g.d_anchor), (t.positive, g.d_positive), (t.negative, g.d_negative)] {
            let acc = d_out
                .entry(idx)
                .or_insert_with(|| vec![0.0; model.output_dim]);
            for (a, x) in acc.iter_mut().zip(d) {
                *a += scale * x;
            }
        }
    }
    let mut grad = vec![0.0; model.param_count()];
    for (idx, d) in &d_out {
        model.backward(inputs[*idx], &traces[idx], d, &mut grad);
    }
    Ok((loss * scale, grad))
}

/// Trains a projection head with mini-batch triplet loss.
///
/// Triplets are re-sampled every epoch from the seeded generator, so the
/// whole run is a deterministic function of `examples` and `config`.
pub fn train(
    examples: &[ExampleVector],
    config: &TrainConfig,
) -> Result<(MetricModel, TrainHistory), MetricError> {
    config.validate()?;
    let input_dim = examples.first().ok_or(MetricError::NoTriplets)?.input.dim();
    if let Some(bad) = examples.iter().find(|e| e.input.dim() != input_dim) {
        return Err(MetricError::DimensionMismatch {
            expected: input_dim,
            actual: bad.input.dim(),
        });
    }
    let inputs: Vec<&[f64]> = examples.iter().map(|e| e.input.values()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = MetricModel::init(
        input_dim,
        config.hidden_dim,
        config.output_dim,
        config.activation,
        &mut rng,
    );
    let mut adam = Adam::new(model.param_count());
    let mut history = TrainHistory::default();

    for epoch in 0..config.epochs {
        let mut triplets = sample_triplets(examples, config.per_anchor(), &mut rng)?;
        if triplets.is_empty() {
            return Err(MetricError::NoTriplets);
        }
        triplets.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in triplets.chunks(config.batch_size) {
            let (loss, grad) = batch_loss_grad(&model, &inputs, batch, config.margin)?;
            if !loss.is_finite() {
                return Err(MetricError::NonFinite(format!("loss at epoch {epoch}")));
            }
            total += loss * batch.len() as f64;
            match config.optimizer {
                OptimizerKind::Adam => adam.step(model.params_mut(), &grad, config),
                OptimizerKind::Sgd => {
                    for (p, g) in model.params_mut().iter_mut().zip(&grad) {
                        *p -= config.learning_rate * g;
                    }
                }
            }
        }
        let mean = total / triplets.len() as f64;
        log::debug!("epoch {epoch}: mean triplet loss {mean:.5}");
        history.epoch_loss.push(mean);
        history.triplets_per_epoch.push(triplets.len());
    }
    if model.params().iter().any(|p| !p.is_finite()) {
        return Err(MetricError::NonFinite("trained parameters".into()));
    }
    Ok((model, history))
}
