//! k-nearest-neighbor batch effect test: chi-square goodness of fit of local
//! batch composition against the cell type's global batch frequencies.

use ndarray::{ArrayView2, Axis};
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::knn::KnnGraph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KbetParams {
    pub k: usize,
    /// Neighborhood size cap as a fraction of the cell-type population.
    pub max_fraction: f64,
    pub anchors: usize,
    pub alpha: f64,
}

impl Default for KbetParams {
    fn default() -> Self {
        Self {
            k: 50,
            max_fraction: 0.25,
            anchors: 200,
            alpha: 0.05,
        }
    }
}

/// Acceptance rate `1 - mean rejection`, averaged over cell types. Cell types
/// too small for a neighborhood, or present in a single batch, are skipped; a
/// dataset with one batch, or with every cell type skipped, scores 1.
pub fn kbet(
    x: ArrayView2<f64>,
    batches: &[usize],
    labels: &[usize],
    params: &KbetParams,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if x.nrows() != batches.len() || x.nrows() != labels.len() {
        return Err(Error::dims("one batch id and label per embedded point"));
    }
    let mut batch_ids = batches.to_vec();
    batch_ids.sort_unstable();
    batch_ids.dedup();
    if batch_ids.len() < 2 {
        return Ok(1.0);
    }
    let mut label_ids = labels.to_vec();
    label_ids.sort_unstable();
    label_ids.dedup();
    let mut scores = Vec::new();
    for &label in &label_ids {
        let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        let local: Vec<usize> = rows
            .iter()
            .map(|&i| batch_ids.binary_search(&batches[i]).expect("present"))
            .collect();
        let mut freq = vec![0.0; batch_ids.len()];
        for &b in &local {
            freq[b] += 1.0;
        }
        let present = freq.iter().filter(|&&f| f > 0.0).count();
        let k = params.k.min((params.max_fraction * rows.len() as f64).floor() as usize);
        if present < 2 || k == 0 {
            continue;
        }
        for f in &mut freq {
            *f /= rows.len() as f64;
        }
        let sub = x.select(Axis(0), &rows);
        let graph = KnnGraph::build(sub.view(), k)?;
        let chi = ChiSquared::new((present - 1) as f64).expect("positive degrees of freedom");
        let anchors = sample(rng, rows.len(), params.anchors.min(rows.len())).into_vec();
        let rejected = anchors
            .iter()
            .filter(|&&a| {
                let mut observed = vec![0.0; freq.len()];
                for &j in graph.neighbors(a) {
                    observed[local[j]] += 1.0;
                }
                let stat: f64 = freq
                    .iter()
                    .zip(&observed)
                    .filter(|(&f, _)| f > 0.0)
                    .map(|(&f, &o)| {
                        let e = f * k as f64;
                        (o - e) * (o - e) / e
                    })
                    .sum();
                1.0 - chi.cdf(stat) < params.alpha
            })
            .count();
        scores.push(1.0 - rejected as f64 / anchors.len() as f64);
    }
    if scores.is_empty() {
        return Ok(1.0);
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
