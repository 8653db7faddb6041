//! Local inverse Simpson index over perplexity-calibrated Gaussian
//! neighborhoods.

use ndarray::ArrayView2;
use rayon::prelude::*;

use super::knn::KnnGraph;
use crate::error::{Error, Result};

pub const DEFAULT_PERPLEXITY: f64 = 30.0;
const BISECTION_STEPS: usize = 50;
const ENTROPY_TOL: f64 = 1e-5;

/// Neighbor weights `exp(-beta d)` with `beta` bisected so the entropy of the
/// normalized weights equals `ln(perplexity)`.
fn calibrated_weights(dist: &[f64], perplexity: f64) -> Vec<f64> {
    let target = perplexity.ln();
    let floor = dist.iter().cloned().fold(f64::INFINITY, f64::min);
    let eval = |beta: f64| -> (f64, Vec<f64>) {
        let w: Vec<f64> = dist.iter().map(|d| (-(d - floor) * beta).exp()).collect();
        let total: f64 = w.iter().sum();
        let mean_d: f64 = dist.iter().zip(&w).map(|(d, p)| (d - floor) * p).sum::<f64>() / total;
        let h = total.ln() + beta * mean_d;
        (h, w.into_iter().map(|p| p / total).collect())
    };
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut beta = 1.0;
    let (mut h, mut p) = eval(beta);
    for _ in 0..BISECTION_STEPS {
        let diff = h - target;
        if diff.abs() < ENTROPY_TOL {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_infinite() { beta * 2.0 } else { (beta + hi) / 2.0 };
        } else {
            hi = beta;
            beta = if lo.is_infinite() { beta / 2.0 } else { (beta + lo) / 2.0 };
        }
        (h, p) = eval(beta);
    }
    p
}

/// Median inverse Simpson index of `ids` over each sample's neighborhood of
/// `3 * perplexity` nearest points (capped at `n - 1`).
fn median_lisi(x: ArrayView2<f64>, ids: &[usize], perplexity: f64) -> Result<(f64, usize)> {
    let n = x.nrows();
    if n != ids.len() {
        return Err(Error::dims("one id per embedded point"));
    }
    if n < 2 {
        return Err(Error::data("LISI needs at least two points"));
    }
    let mut uniq = ids.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    let k = ((3.0 * perplexity) as usize).clamp(1, n - 1);
    let graph = KnnGraph::build(x, k)?;
    let perplexity = perplexity.min(k as f64);
    let mut lisi: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = calibrated_weights(graph.distances(i), perplexity);
            let mut mass = vec![0.0; uniq.len()];
            for (&j, w) in graph.neighbors(i).iter().zip(&p) {
                mass[uniq.binary_search(&ids[j]).expect("present")] += w;
            }
            1.0 / mass.iter().map(|m| m * m).sum::<f64>()
        })
        .collect();
    lisi.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        lisi[n / 2]
    } else {
        0.5 * (lisi[n / 2 - 1] + lisi[n / 2])
    };
    Ok((median, uniq.len()))
}

/// Cell-type LISI rescaled to `[0, 1]` with 1 meaning no label mixing:
/// `(L - lisi) / (L - 1)` for `L` distinct labels; 1 when there is one label.
pub fn clisi(x: ArrayView2<f64>, labels: &[usize], perplexity: f64) -> Result<f64> {
    let (lisi, l) = median_lisi(x, labels, perplexity)?;
    if l == 1 {
        return Ok(1.0);
    }
    Ok(((l as f64 - lisi) / (l as f64 - 1.0)).clamp(0.0, 1.0))
}

/// Batch LISI rescaled to `[0, 1]` with 1 meaning full mixing:
/// `(lisi - 1) / (B - 1)` for `B` batches; 1 when there is one batch.
pub fn ilisi(x: ArrayView2<f64>, batches: &[usize], perplexity: f64) -> Result<f64> {
    let (lisi, b) = median_lisi(x, batches, perplexity)?;
    if b == 1 {
        return Ok(1.0);
    }
    Ok(((lisi - 1.0) / (b as f64 - 1.0)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn calibration_hits_the_target_entropy() {
        let d: Vec<f64> = (0..90).map(|i| 0.1 * i as f64).collect();
        let p = calibrated_weights(&d, 30.0);
        let h = -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>();
        assert!((h - 30.0f64.ln()).abs() < 1e-4);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_label_is_perfect_clisi() {
        let x = Array2::from_shape_fn((50, 2), |(i, j)| (i * (j + 1)) as f64 * 0.1);
        assert_eq!(clisi(x.view(), &[0; 50], 30.0).unwrap(), 1.0);
    }

    #[test]
    fn interleaved_and_separated_batches() {
        let x = Array2::from_shape_fn((400, 2), |(i, j)| ((i / 2) * (j + 1) % 97) as f64 + 0.001 * (i % 2) as f64);
        let interleaved: Vec<usize> = (0..400).map(|i| i % 2).collect();
        assert!(ilisi(x.view(), &interleaved, 30.0).unwrap() > 0.95);
        let far = Array2::from_shape_fn((400, 2), |(i, j)| (i % 2) as f64 * 1e4 + ((i / 2) * (j + 1) % 97) as f64);
        assert!(ilisi(far.view(), &interleaved, 30.0).unwrap() < 0.02);
    }
}
