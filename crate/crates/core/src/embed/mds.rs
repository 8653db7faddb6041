//! Classical MDS followed by SMACOF stress majorization.

use ndarray::{Array2, Axis};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::eigen::top_eigenpairs;

/// Coordinates whose Gram matrix best matches `-J D^2 J / 2`. `None` when the
/// Gram matrix has no positive eigenvalue (all points coincide).
pub fn classical_mds(dist: &Array2<f64>, dims: usize, rng: &mut ChaCha8Rng) -> Option<Array2<f64>> {
    let n = dist.nrows();
    let sq = dist.mapv(|d| d * d);
    let row_mean = sq.mean_axis(Axis(1)).expect("non-empty");
    let total_mean = row_mean.mean().expect("non-empty");
    let gram = Array2::from_shape_fn((n, n), |(i, j)| {
        -0.5 * (sq[[i, j]] - row_mean[i] - row_mean[j] + total_mean)
    });
    let (values, vectors) = top_eigenpairs(&gram, dims, rng);
    let top = values.first().copied().unwrap_or(0.0);
    if top <= 1e-12 * gram.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE) || top <= 0.0 {
        return None;
    }
    let mut coords = Array2::zeros((n, dims));
    for (c, &lambda) in values.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        coords.column_mut(c).assign(&(&vectors.column(c) * s));
    }
    Some(coords)
}

/// Stress `sum_{i<j} w_i w_j (d_ij(X) - D_ij)^2`, unit weights when `None`.
pub fn stress(dist: &Array2<f64>, x: &Array2<f64>, weights: Option<&[f64]>) -> f64 {
    let n = dist.nrows();
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d = euclid(x, i, j);
            s += w(i) * w(j) * (d - dist[[i, j]]).powi(2);
        }
    }
    s
}

fn euclid(x: &Array2<f64>, i: usize, j: usize) -> f64 {
    x.row(i)
        .iter()
        .zip(x.row(j).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Relative stress decrease below which refinement stops.
pub const STRESS_TOL: f64 = 1e-3;

/// Guttman transforms for stress with pair weights `w_i w_j`. With product
/// weights the majorizer inverts in closed form:
/// `X_i <- sum_j w_j (D_ij / d_ij) (X_i - X_j) / sum_j w_j`.
pub fn smacof(dist: &Array2<f64>, init: Array2<f64>, iters: usize, weights: Option<&[f64]>) -> Array2<f64> {
    let n = dist.nrows();
    let dims = init.ncols();
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total: f64 = (0..n).map(w).sum();
    let mut x = init;
    let mut prev = stress(dist, &x, weights);
    for _ in 0..iters {
        let mut next = Array2::zeros((n, dims));
        next.axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(i, mut out)| {
                let mut diag = 0.0;
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let d = euclid(&x, i, j);
                    if d > 0.0 {
                        let b = -w(j) * dist[[i, j]] / d;
                        diag -= b;
                        out.scaled_add(b, &x.row(j));
                    }
                }
                out.scaled_add(diag, &x.row(i));
                out.mapv_inplace(|v| v / total);
            });
        let cur = stress(dist, &next, weights);
        x = next;
        if prev - cur <= STRESS_TOL * prev {
            break;
        }
        prev = cur;
    }
    x
}
