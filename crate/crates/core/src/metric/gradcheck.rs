use super::model::MetricModel;
use super::train::batch_loss_grad;
use super::triplets::Triplet;
use super::MetricError;
use crate::embedding::EmbeddingVector;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Gradients smaller than this in both routes are compared absolutely.
const RELATIVE_FLOOR: f64 = 1e-8;

const ONLY: Triplet = Triplet {
    anchor: 0,
    positive: 1,
    negative: 2,
};

/// Triplet loss and its analytic parameter gradient for one (A, P, N) input triple.
pub fn loss_and_gradient(
    model: &MetricModel,
    triple: [&EmbeddingVector; 3],
    margin: f64,
) -> Result<(f64, Vec<f64>), MetricError> {
    let inputs: Vec<&[f64]> = triple.iter().map(|v| v.values()).collect();
    batch_loss_grad(model, &inputs, &[ONLY], margin)
}

/// Maximum relative error between analytic and central-difference gradients.
///
/// Fails with [`MetricError::HingeInactive`] when the loss is zero at this
/// point, where the gradient vanishes and the comparison proves nothing.
pub fn gradient_check(
    model: &MetricModel,
    triple: [&EmbeddingVector; 3],
    margin: f64,
    step: f64,
) -> Result<f64, MetricError> {
    let (loss, analytic) = loss_and_gradient(model, triple, margin)?;
    if loss <= 0.0 {
        return Err(MetricError::HingeInactive);
    }
    let inputs: Vec<&[f64]> = triple.iter().map(|v| v.values()).collect();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (i, &g) in analytic.iter().enumerate() {
        let original = probe.params()[i];
        probe.params_mut()[i] = original + step;
        let (up, _) = batch_loss_grad(&probe, &inputs, &[ONLY], margin)?;
        probe.params_mut()[i] = original - step;
        let (down, _) = batch_loss_grad(&probe, &inputs, &[ONLY], margin)?;
        probe.params_mut()[i] = original;
        let numeric = (up - down) / (2.0 * step);
        let scale = g.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
        worst = worst.max((g - numeric).abs() / scale);
    }
    Ok(worst)
}
