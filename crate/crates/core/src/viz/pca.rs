//! Principal component projection via the covariance eigendecomposition.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{check_points, VizError};
use crate::embedding::EmbeddingVector;

/// Variance below this is treated as zero.
const ZERO_VARIANCE: f64 = 1e-24;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    pub coords: Vec<[f64; 2]>,
    /// Variance captured by the first and second component.
    pub variance: [f64; 2],
    pub zero_variance: bool,
}

/// Projects onto the top two principal components. Each component's sign is
/// fixed so its largest-magnitude loading is positive.
pub fn pca_2d(points: &[EmbeddingVector]) -> Result<PcaProjection, VizError> {
    let dim = check_points(points)?;
    let n = points.len();
    let mut mean = vec![0.0; dim];
    for p in points {
        for (m, v) in mean.iter_mut().zip(p.values()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, dim, |i, j| points[i].values()[j] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut axes = Vec::with_capacity(2);
    let mut variance = [0.0; 2];
    for (slot, &k) in order.iter().take(2).enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        let lead = (0..dim)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a)))
            .expect("dim >= 1");
        if v[lead] < 0.0 {
            v.neg_mut();
        }
        variance[slot] = eig.eigenvalues[k].max(0.0);
        axes.push(v);
    }
    // A 1-D input has a single component; the second axis is then all zeros.
    while axes.len() < 2 {
        axes.push(nalgebra::DVector::zeros(dim));
    }
    let zero_variance = variance[0] <= ZERO_VARIANCE;
    let coords = (0..n)
        .map(|i| {
            let row = centered.row(i);
            if zero_variance {
                [0.0, 0.0]
            } else {
                [row.dot(&axes[0].transpose()), row.dot(&axes[1].transpose())]
            }
        })
        .collect();
    Ok(PcaProjection {
        coords,
        variance,
        zero_variance,
    })
}
