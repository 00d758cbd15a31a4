use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::embedding::EmbeddingVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
    Linear,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Relu => 1,
            Activation::Linear => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Linear),
            _ => None,
        }
    }

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `h`.
    fn derivative(self, z: f64, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Two-layer projection head `input -> hidden -> output`.
///
/// Parameters live in one flat buffer: `W1` (hidden x input, row-major),
/// `b1`, `W2` (output x hidden, row-major), `b2`. The hidden layer is
/// activated; the output layer is affine.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricModel {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
    params: Vec<f64>,
}

/// Intermediate values kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct ForwardTrace {
    pub pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
}

pub fn param_count(input: usize, hidden: usize, output: usize) -> usize {
    hidden * input + hidden + output * hidden + output
}

impl MetricModel {
    pub fn zeros(input_dim: usize, hidden_dim: usize, output_dim: usize, activation: Activation) -> Self {
        Self {
            input_dim,
            hidden_dim,
            output_dim,
            activation,
            params: vec![0.0; param_count(input_dim, hidden_dim, output_dim)],
        }
    }

    /// Uniform initialization in `±1/sqrt(fan_in)` for weights and biases.
    pub fn init<R: Rng>(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let mut m = Self::zeros(input_dim, hidden_dim, output_dim, activation);
        let b1 = 1.0 / (input_dim as f64).sqrt();
        let b2 = 1.0 / (hidden_dim as f64).sqrt();
        let first = hidden_dim * input_dim + hidden_dim;
        for (i, p) in m.params.iter_mut().enumerate() {
            let bound = if i < first { b1 } else { b2 };
            *p = rng.random_range(-bound..=bound);
        }
        m
    }

    pub fn from_params(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        activation: Activation,
        params: Vec<f64>,
    ) -> Result<Self, MetricError> {
        let expected = param_count(input_dim, hidden_dim, output_dim);
        if params.len() != expected {
            return Err(MetricError::DimensionMismatch {
                expected,
                actual: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(MetricError::NonFinite("model parameters".into()));
        }
        Ok(Self {
            input_dim,
            hidden_dim,
            output_dim,
            activation,
            params,
        })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden_dim * self.input_dim;
        let w2 = b1 + self.hidden_dim;
        let b2 = w2 + self.output_dim * self.hidden_dim;
        (b1, w2, b2)
    }

    pub fn w1(&self) -> &[f64] {
        &self.params[..self.offsets().0]
    }

    pub fn b1(&self) -> &[f64] {
        let (b1, w2, _) = self.offsets();
        &self.params[b1..w2]
    }

    pub fn w2(&self) -> &[f64] {
        let (_, w2, b2) = self.offsets();
        &self.params[w2..b2]
    }

    pub fn b2(&self) -> &[f64] {
        &self.params[self.offsets().2..]
    }

    pub(crate) fn trace(&self, input: &[f64]) -> Result<ForwardTrace, MetricError> {
        if input.len() != self.input_dim {
            return Err(MetricError::DimensionMismatch {
                expected: self.input_dim,
                actual: input.len(),
            });
        }
        let (w1, b1, w2, b2) = (self.w1(), self.b1(), self.w2(), self.b2());
        let pre: Vec<f64> = (0..self.hidden_dim)
            .map(|j| {
                let row = &w1[j * self.input_dim..(j + 1) * self.input_dim];
                b1[j] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect();
        let hidden: Vec<f64> = pre.iter().map(|&z| self.activation.apply(z)).collect();
        let output: Vec<f64> = (0..self.output_dim)
            .map(|k| {
                let row = &w2[k * self.hidden_dim..(k + 1) * self.hidden_dim];
                b2[k] + row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>()
            })
            .collect();
        if output.iter().any(|v| !v.is_finite()) {
            return Err(MetricError::NonFinite("forward output".into()));
        }
        Ok(ForwardTrace { pre, hidden, output })
    }

    /// Raw head output (not normalized).
    pub fn forward(&self, input: &EmbeddingVector) -> Result<EmbeddingVector, MetricError> {
        let t = self.trace(input.values())?;
        Ok(EmbeddingVector::new(t.output)?)
    }

    /// Unit-norm representation used for neighbour search and plots.
    pub fn represent(&self, input: &EmbeddingVector) -> Result<EmbeddingVector, MetricError> {
        Ok(self.forward(input)?.normalized()?)
    }

    /// Accumulates parameter gradients for one input into `grad`, given the
    /// gradient of the loss with respect to the head output.
    pub(crate) fn backward(
        &self,
        input: &[f64],
        trace: &ForwardTrace,
        d_output: &[f64],
        grad: &mut [f64],
    ) {
        let (ob1, ow2, ob2) = self.offsets();
        let (h_dim, i_dim) = (self.hidden_dim, self.input_dim);
        let w2 = self.w2();
        let mut d_hidden = vec![0.0; h_dim];
        for (k, &dy) in d_output.iter().enumerate() {
            if dy == 0.0 {
                continue;
            }
            grad[ob2 + k] += dy;
            let g_row = &mut grad[ow2 + k * h_dim..ow2 + (k + 1) * h_dim];
            for (g, h) in g_row.iter_mut().zip(&trace.hidden) {
                *g += dy * h;
            }
            let w_row = &w2[k * h_dim..(k + 1) * h_dim];
            for (dh, w) in d_hidden.iter_mut().zip(w_row) {
                *dh += dy * w;
            }
        }
        for j in 0..h_dim {
            let dz = d_hidden[j] * self.activation.derivative(trace.pre[j], trace.hidden[j]);
            if dz == 0.0 {
                continue;
            }
            grad[ob1 + j] += dz;
            let g_row = &mut grad[j * i_dim..(j + 1) * i_dim];
            for (g, x) in g_row.iter_mut().zip(input) {
                *g += dz * x;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity(n: usize) -> Vec<f64> {
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = 1.0;
        }
        m
    }

    #[test]
    fn zero_weights_give_bias_output() {
        let mut m = MetricModel::zeros(3, 2, 2, Activation::Tanh);
        let n = m.param_count();
        m.params_mut()[n - 2] = 0.5;
        m.params_mut()[n - 1] = -1.5;
        for x in [[1.0, 2.0, 3.0], [-7.0, 0.0, 0.1]] {
            let y = m.forward(&EmbeddingVector::new(x.to_vec()).unwrap()).unwrap();
            assert_eq!(y.values(), &[0.5, -1.5]);
        }
    }

    #[test]
    fn identity_layers_pass_input_through() {
        let d = 4;
        let mut params = identity(d);
        params.extend(vec![0.0; d]);
        params.extend(identity(d));
        params.extend(vec![0.0; d]);
        let m = MetricModel::from_params(d, d, d, Activation::Linear, params).unwrap();
        let x = EmbeddingVector::new(vec![0.3, -1.0, 2.5, 0.0]).unwrap();
        assert_eq!(m.forward(&x).unwrap(), x);
    }

    #[test]
    fn forward_is_deterministic() {
        let m = MetricModel::init(5, 4, 3, Activation::Tanh, &mut ChaCha8Rng::seed_from_u64(9));
        let x = EmbeddingVector::new(vec![0.1, 0.2, -0.3, 0.4, 0.5]).unwrap();
        let a = m.forward(&x).unwrap();
        let b = m.forward(&x).unwrap();
        assert!(a.values().iter().zip(b.values()).all(|(p, q)| p.to_bits() == q.to_bits()));
        let again = MetricModel::init(5, 4, 3, Activation::Tanh, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(m, again);
    }

    #[test]
    fn forward_rejects_wrong_dim() {
        let m = MetricModel::zeros(3, 2, 2, Activation::Tanh);
        let x = EmbeddingVector::new(vec![1.0; 4]).unwrap();
        assert!(matches!(m.forward(&x), Err(MetricError::DimensionMismatch { .. })));
    }

    #[test]
    fn init_respects_fan_in_bounds() {
        let m = MetricModel::init(16, 9, 4, Activation::Tanh, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(m.w1().iter().chain(m.b1()).all(|w| w.abs() <= 0.25));
        assert!(m.w2().iter().chain(m.b2()).all(|w| w.abs() <= 1.0 / 3.0));
    }
}
