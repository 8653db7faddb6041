//! Synthetic evaluation scenarios: feature splits of one dataset into two
//! domains, simulated batch effects, size matching and blob data.

mod batches;
mod split;
mod subsample;
mod synthetic;

pub use batches::{batch_grid, simulate_batches, BatchPair, DROPOUT_LEVELS, NOISE_LEVELS};
pub use split::{split, SplitKind, SplitManifest, SplitOutput, SplitSpec};
pub use subsample::{stratified_counts, subsample_larger, Subsampled};
pub use synthetic::{blobs, BlobParams};

use ndarray::{Array2, Axis};

/// Column-wise z-scores; constant columns are only centered.
pub(crate) fn standardize(x: &Array2<f64>) -> (Array2<f64>, Vec<f64>) {
    let n = x.nrows().max(1) as f64;
    let means = x.mean_axis(Axis(0)).unwrap_or_else(|| ndarray::Array1::zeros(x.ncols()));
    let mut stds = Vec::with_capacity(x.ncols());
    let mut out = x.clone();
    for (j, mut col) in out.columns_mut().into_iter().enumerate() {
        let m = means[j];
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        let sd = var.sqrt();
        stds.push(sd);
        let scale = if sd > 0.0 { sd } else { 1.0 };
        col.mapv_inplace(|v| (v - m) / scale);
    }
    (out, stds)
}
