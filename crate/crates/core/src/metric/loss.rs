//! Cosine triplet hinge: `max(0, cos(a, n) - cos(a, p) + margin)`.

use super::MetricError;
use crate::embedding::{dot, EmbeddingVector};

fn norm(v: &[f64]) -> Result<f64, MetricError> {
    let n = dot(v, v).sqrt();
    if n == 0.0 {
        return Err(MetricError::ZeroNorm);
    }
    Ok(n)
}

fn cos(u: &[f64], v: &[f64], nu: f64, nv: f64) -> f64 {
    (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0)
}

pub fn triplet_loss(
    anchor: &EmbeddingVector,
    positive: &EmbeddingVector,
    negative: &EmbeddingVector,
    margin: f64,
) -> Result<f64, MetricError> {
    Ok(triplet_loss_grad(anchor.values(), positive.values(), negative.values(), margin)?.loss)
}

#[derive(Debug, Clone)]
pub(crate) struct TripletGrad {
    pub loss: f64,
    /// Gradients with respect to the anchor, positive and negative
    /// representations; all zero when the hinge is inactive.
    pub d_anchor: Vec<f64>,
    pub d_positive: Vec<f64>,
    pub d_negative: Vec<f64>,
}

/// Gradient of `cos(u, v)` with respect to `u`, accumulated into `out` times `scale`.
fn add_cos_grad(out: &mut [f64], u: &[f64], v: &[f64], nu: f64, nv: f64, c: f64, scale: f64) {
    let inv = 1.0 / (nu * nv);
    let self_term = c / (nu * nu);
    for ((o, &ui), &vi) in out.iter_mut().zip(u).zip(v) {
        *o += scale * (vi * inv - self_term * ui);
    }
}

pub(crate) fn triplet_loss_grad(
    a: &[f64],
    p: &[f64],
    n: &[f64],
    margin: f64,
) -> Result<TripletGrad, MetricError> {
    if a.len() != p.len() || a.len() != n.len() {
        return Err(MetricError::DimensionMismatch {
            expected: a.len(),
            actual: if a.len() != p.len() { p.len() } else { n.len() },
        });
    }
    let (na, np, nn) = (norm(a)?, norm(p)?, norm(n)?);
    let cos_ap = cos(a, p, na, np);
    let cos_an = cos(a, n, na, nn);
    let gap = cos_an - cos_ap + margin;
    let d = a.len();
    let mut g = TripletGrad {
        loss: gap.max(0.0),
        d_anchor: vec![0.0; d],
        d_positive: vec![0.0; d],
        d_negative: vec![0.0; d],
    };
    if gap > 0.0 {
        add_cos_grad(&mut g.d_anchor, a, n, na, nn, cos_an, 1.0);
        add_cos_grad(&mut g.d_anchor, a, p, na, np, cos_ap, -1.0);
        add_cos_grad(&mut g.d_positive, p, a, np, na, cos_ap, -1.0);
        add_cos_grad(&mut g.d_negative, n, a, nn, na, cos_an, 1.0);
    }
    Ok(g)
}
