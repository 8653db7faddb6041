//! Exact k-nearest-neighbor lists with index tie-breaking.

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kmeans::sq_dist;

/// Per-sample neighbor lists, nearest first; ties go to the lower index.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    k: usize,
    neighbors: Vec<Vec<usize>>,
    distances: Vec<Vec<f64>>,
}

impl KnnGraph {
    /// Neighbors of every row among all other rows. Needs `k < n`.
    pub fn build(x: ArrayView2<f64>, k: usize) -> Result<Self> {
        let n = x.nrows();
        if k == 0 || k >= n {
            return Err(Error::param(format!("k = {k} needs 0 < k < {n}")));
        }
        let candidates: Vec<usize> = (0..n).collect();
        let (neighbors, distances) = (0..n)
            .into_par_iter()
            .map(|i| nearest(x, x.row(i), &candidates, k, Some(i)))
            .unzip();
        Ok(Self { k, neighbors, distances })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Euclidean distances matching [`KnnGraph::neighbors`].
    pub fn distances(&self, i: usize) -> &[f64] {
        &self.distances[i]
    }
}

/// The `k` rows of `x` among `candidates` closest to `query`, skipping
/// `exclude`, with their Euclidean distances.
pub fn nearest(
    x: ArrayView2<f64>,
    query: ArrayView1<f64>,
    candidates: &[usize],
    k: usize,
    exclude: Option<usize>,
) -> (Vec<usize>, Vec<f64>) {
    let mut scored: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|&&j| Some(j) != exclude)
        .map(|&j| (sq_dist(query, x.row(j)), j))
        .collect();
    let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    let k = k.min(scored.len());
    if k < scored.len() {
        scored.select_nth_unstable_by(k, order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(order);
    scored.into_iter().map(|(d, j)| (j, d.sqrt())).unzip()
}
