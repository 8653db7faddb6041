//! Per-label connectivity of the kNN graph.

use ndarray::ArrayView2;
use petgraph::unionfind::UnionFind;

use super::knn::KnnGraph;
use crate::error::{Error, Result};

/// Mean over labels of `|largest component| / |label|` in the subgraph of the
/// (union-symmetrized) kNN graph induced by each label's samples.
pub fn graph_connectivity(x: ArrayView2<f64>, labels: &[usize], k: usize) -> Result<f64> {
    let n = x.nrows();
    if n != labels.len() {
        return Err(Error::dims("one label per embedded point"));
    }
    if n < 2 {
        return Ok(1.0);
    }
    let graph = KnnGraph::build(x, k.min(n - 1))?;
    let mut uniq = labels.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    let mut total = 0.0;
    for &label in &uniq {
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == label).collect();
        let mut local = vec![usize::MAX; n];
        for (p, &i) in members.iter().enumerate() {
            local[i] = p;
        }
        let mut components = UnionFind::<usize>::new(members.len());
        for &i in &members {
            for &j in graph.neighbors(i) {
                if local[j] != usize::MAX {
                    components.union(local[i], local[j]);
                }
            }
        }
        let mut sizes = vec![0usize; members.len()];
        for p in 0..members.len() {
            sizes[components.find(p)] += 1;
        }
        total += *sizes.iter().max().expect("non-empty") as f64 / members.len() as f64;
    }
    Ok(total / uniq.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn split_label_counts_its_larger_part() {
        // label 0: a ring of 7 points and a far triangle of 3; label 1: a blob
        let mut x = Array2::zeros((15, 2));
        for i in 0..7 {
            let a = i as f64 / 7.0 * std::f64::consts::TAU;
            x[[i, 0]] = a.cos();
            x[[i, 1]] = a.sin();
        }
        for i in 7..10 {
            x[[i, 0]] = 100.0 + (i - 7) as f64 * 0.1;
            x[[i, 1]] = ((i - 7) % 2) as f64 * 0.1;
        }
        for i in 10..15 {
            x[[i, 0]] = -50.0 + (i - 10) as f64 * 0.1;
        }
        let labels: Vec<usize> = (0..15).map(|i| usize::from(i >= 10)).collect();
        let score = graph_connectivity(x.view(), &labels, 2).unwrap();
        assert!((score - (0.7 + 1.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn tight_blobs_and_singletons_are_connected() {
        let x = Array2::from_shape_fn((21, 2), |(i, j)| (i % 3) as f64 * 50.0 + ((i / 3) * (j + 1)) as f64 * 0.01);
        let mut labels: Vec<usize> = (0..21).map(|i| i % 3).collect();
        labels[20] = 9;
        assert_eq!(graph_connectivity(x.view(), &labels, 5).unwrap(), 1.0);
    }
}
