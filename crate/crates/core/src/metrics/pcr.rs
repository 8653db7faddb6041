//! Principal component regression on batch: how much of the variance of a
//! representation the batch assignment explains.

use nalgebra::DMatrix;
use ndarray::ArrayView2;

use crate::error::{Error, Result};

pub const MAX_COMPONENTS: usize = 50;

/// `sum_i var_i R^2_i / sum_i var_i` over the leading principal components,
/// with `R^2_i` from regressing component scores on one-hot batch (with
/// intercept), which reduces to the between-batch share of the score variance.
pub fn batch_variance(x: ArrayView2<f64>, batches: &[usize]) -> Result<f64> {
    let (n, d) = x.dim();
    if n != batches.len() {
        return Err(Error::dims("one batch id per row"));
    }
    if n < 2 || d == 0 {
        return Err(Error::data("principal components need at least two rows and one column"));
    }
    let means: Vec<f64> = (0..d).map(|j| x.column(j).sum() / n as f64).collect();
    let centered = DMatrix::from_fn(n, d, |i, j| x[[i, j]] - means[j]);
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    order.truncate(MAX_COMPONENTS.min(n - 1).min(d));

    let mut ids = batches.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let group: Vec<usize> = batches.iter().map(|b| ids.binary_search(b).expect("present")).collect();

    let mut explained = 0.0;
    let mut total = 0.0;
    for &c in &order {
        let var = eig.eigenvalues[c].max(0.0);
        let scores = &centered * eig.eigenvectors.column(c);
        let mean = scores.sum() / n as f64;
        let ss_total: f64 = scores.iter().map(|s| (s - mean) * (s - mean)).sum();
        let mut sums = vec![0.0; ids.len()];
        let mut counts = vec![0.0; ids.len()];
        for (s, &g) in scores.iter().zip(&group) {
            sums[g] += s;
            counts[g] += 1.0;
        }
        let ss_between: f64 = sums
            .iter()
            .zip(&counts)
            .map(|(s, c)| c * (s / c - mean) * (s / c - mean))
            .sum();
        let r2 = if ss_total > 0.0 { ss_between / ss_total } else { 0.0 };
        explained += var * r2;
        total += var;
    }
    if total <= 0.0 {
        return Ok(0.0);
    }
    Ok(explained / total)
}

/// `(before - after) / before` clamped to `[0, 1]`. When the raw data carries
/// no batch variance the score is 1 if the embedding carries none either.
pub fn pcr_comparison(raw: ArrayView2<f64>, embedding: ArrayView2<f64>, batches: &[usize]) -> Result<f64> {
    let before = batch_variance(raw, batches)?;
    let after = batch_variance(embedding, batches)?;
    if before <= 1e-300 {
        return Ok(if after <= 1e-12 { 1.0 } else { 0.0 });
    }
    Ok(((before - after) / before).clamp(0.0, 1.0))
}
