//! Exact O(n^2) t-SNE.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{check_points, VizError};
use crate::embedding::EmbeddingVector;

const ENTROPY_TOL: f64 = 1e-5;
const MAX_SEARCH_STEPS: usize = 50;
const MIN_GAIN: f64 = 0.01;
const P_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iters: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    /// Iterations run with exaggerated affinities and momentum 0.5.
    pub exaggeration_iters: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iters: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            seed: 0,
        }
    }
}

impl TsneConfig {
    fn validate(&self, n: usize) -> Result<(), VizError> {
        let bad = |m: String| Err(VizError::InvalidConfig(m));
        if !(self.perplexity > 0.0) || self.perplexity >= (n as f64 - 1.0) / 3.0 {
            return bad(format!(
                "perplexity {} must be positive and below (n - 1) / 3 = {:.3}",
                self.perplexity,
                (n as f64 - 1.0) / 3.0
            ));
        }
        if self.iters < 250 {
            return bad(format!("iters must be >= 250, got {}", self.iters));
        }
        if !(self.learning_rate > 0.0) || !(self.early_exaggeration >= 1.0) {
            return bad("learning_rate must be > 0 and early_exaggeration >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneProjection {
    pub coords: Vec<[f64; 2]>,
    /// KL(P || Q) after every iteration, measured against the unexaggerated P.
    pub kl_history: Vec<f64>,
    /// Achieved entropy (nats) of each conditional distribution.
    pub entropies: Vec<f64>,
}

/// Conditional affinities `p_{j|i}` (row-major, zero diagonal) calibrated so
/// each row's entropy matches `ln(perplexity)`, plus the achieved entropies.
pub fn calibrate_affinities(dist2: &[f64], n: usize, perplexity: f64) -> (Vec<f64>, Vec<f64>) {
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    let mut entropies = vec![0.0; n];
    let mut row = vec![0.0; n];
    for i in 0..n {
        let d = &dist2[i * n..(i + 1) * n];
        let others = || (0..n).filter(move |&j| j != i);
        let d_min = others().map(|j| d[j]).fold(f64::INFINITY, f64::min);
        let d_mean = others().map(|j| d[j] - d_min).sum::<f64>() / (n - 1) as f64;
        let mut beta = if d_mean > 0.0 { 1.0 / d_mean } else { 1.0 };
        let (mut lo, mut hi) = (0.0, f64::INFINITY);
        let mut h = 0.0;
        for _ in 0..MAX_SEARCH_STEPS {
            let mut sum = 0.0;
            let mut weighted = 0.0;
            for j in others() {
                let shifted = d[j] - d_min;
                let w = (-beta * shifted).exp();
                row[j] = w;
                sum += w;
                weighted += shifted * w;
            }
            h = sum.ln() + beta * weighted / sum;
            for j in others() {
                row[j] /= sum;
            }
            let diff = h - target;
            if diff.abs() < ENTROPY_TOL {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
        for j in others() {
            p[i * n + j] = row[j];
        }
        entropies[i] = h;
    }
    (p, entropies)
}

fn squared_distances(points: &[EmbeddingVector]) -> Vec<f64> {
    let n = points.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = points[i]
                .values()
                .iter()
                .zip(points[j].values())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[i * n + j] = s;
            d[j * n + i] = s;
        }
    }
    d
}

/// Runs exact t-SNE with momentum and per-coordinate gains.
pub fn tsne_2d(points: &[EmbeddingVector], config: &TsneConfig) -> Result<TsneProjection, VizError> {
    check_points(points)?;
    let n = points.len();
    config.validate(n)?;
    let dist2 = squared_distances(points);
    if dist2.iter().all(|&d| d == 0.0) {
        return Err(VizError::Degenerate);
    }
    let (cond, entropies) = calibrate_affinities(&dist2, n, config.perplexity);
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64)).max(P_FLOOR);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = Normal::new(0.0, 1e-2).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [init.sample(&mut rng), init.sample(&mut rng)]).collect();
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut num = vec![0.0; n * n];
    let mut grad = vec![[0.0f64; 2]; n];
    let mut kl_history = Vec::with_capacity(config.iters);

    for iter in 0..config.iters {
        let early = iter < config.exaggeration_iters;
        let exaggeration = if early { config.early_exaggeration } else { 1.0 };
        let momentum = if early { 0.5 } else { 0.8 };

        let mut z = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let q = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = q;
                num[j * n + i] = q;
                z += 2.0 * q;
            }
        }
        let mut kl = 0.0;
        for i in 0..n {
            let mut g = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q_ij = (num[i * n + j] / z).max(P_FLOOR);
                let p_ij = p[i * n + j];
                kl += p_ij * (p_ij / q_ij).ln();
                let coeff = (exaggeration * p_ij - q_ij) * num[i * n + j];
                g[0] += coeff * (y[i][0] - y[j][0]);
                g[1] += coeff * (y[i][1] - y[j][1]);
            }
            grad[i] = [4.0 * g[0], 4.0 * g[1]];
        }
        kl_history.push(kl);

        for i in 0..n {
            for k in 0..2 {
                let g = grad[i][k];
                gains[i][k] = if (g > 0.0) != (update[i][k] > 0.0) {
                    gains[i][k] + 0.2
                } else {
                    (gains[i][k] * 0.8).max(MIN_GAIN)
                };
                update[i][k] = momentum * update[i][k] - config.learning_rate * gains[i][k] * g;
                y[i][k] += update[i][k];
            }
        }
        let mean = y.iter().fold([0.0, 0.0], |m, v| [m[0] + v[0], m[1] + v[1]]);
        for v in &mut y {
            v[0] -= mean[0] / n as f64;
            v[1] -= mean[1] / n as f64;
        }
    }
    if y.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
        return Err(VizError::InvalidConfig("t-SNE diverged; lower the learning rate".into()));
    }
    Ok(TsneProjection {
        coords: y,
        kl_history,
        entropies,
    })
}
