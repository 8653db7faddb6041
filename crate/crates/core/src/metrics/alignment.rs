//! Correspondence and label-transfer scores for two embedded domains.

use ndarray::ArrayView2;
use rayon::prelude::*;

use super::knn::{nearest, KnnGraph};
use crate::error::{Error, Result};
use crate::kmeans::sq_dist;

/// Fraction of `queries` whose majority label among the `k` nearest
/// `references` equals their true label. Vote ties go to the smallest class.
pub fn label_transfer_accuracy(
    references: ArrayView2<f64>,
    reference_labels: &[usize],
    queries: ArrayView2<f64>,
    query_labels: &[usize],
    k: usize,
) -> Result<f64> {
    if references.nrows() != reference_labels.len() || queries.nrows() != query_labels.len() {
        return Err(Error::dims("label vectors must match the point counts"));
    }
    if references.ncols() != queries.ncols() {
        return Err(Error::dims("references and queries live in different spaces"));
    }
    if k == 0 || k > references.nrows() {
        return Err(Error::param(format!(
            "k = {k} needs 0 < k <= {} reference points",
            references.nrows()
        )));
    }
    if queries.nrows() == 0 {
        return Err(Error::data("no query points to score"));
    }
    let classes = reference_labels.iter().chain(query_labels).max().map_or(0, |c| c + 1);
    let all: Vec<usize> = (0..references.nrows()).collect();
    let correct = (0..queries.nrows())
        .into_par_iter()
        .filter(|&q| {
            let (nbrs, _) = nearest(references, queries.row(q), &all, k, None);
            let mut votes = vec![0usize; classes];
            for j in nbrs {
                votes[reference_labels[j]] += 1;
            }
            let best = votes
                .iter()
                .enumerate()
                .fold(0, |b, (c, &v)| if v > votes[b] { c } else { b });
            best == query_labels[q]
        })
        .count();
    Ok(correct as f64 / queries.nrows() as f64)
}

/// `2 (1 - kbar / k)` with `kbar` the mean number of same-domain points among
/// each sample's `k` nearest neighbors. Not clamped.
pub fn alignment_score(embedding: ArrayView2<f64>, domain: &[usize], k: usize) -> Result<f64> {
    if embedding.nrows() != domain.len() {
        return Err(Error::dims("one domain id per embedded point"));
    }
    let graph = KnnGraph::build(embedding, k)?;
    let same: usize = (0..graph.len())
        .map(|i| graph.neighbors(i).iter().filter(|&&j| domain[j] == domain[i]).count())
        .sum();
    let kbar = same as f64 / graph.len() as f64;
    Ok(2.0 * (1.0 - kbar / k as f64))
}

/// Mean over all `2n` samples of the fraction of opposite-domain samples
/// strictly closer than the true match; row `i` of `a` matches row `i` of `b`.
pub fn foscttm(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<f64> {
    let n = a.nrows();
    if b.nrows() != n || a.ncols() != b.ncols() {
        return Err(Error::dims("foscttm needs two equally shaped embeddings"));
    }
    if n == 0 {
        return Err(Error::data("foscttm of empty embeddings"));
    }
    let side = |x: ArrayView2<f64>, y: ArrayView2<f64>| -> usize {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let own = sq_dist(x.row(i), y.row(i));
                (0..n).filter(|&j| sq_dist(x.row(i), y.row(j)) < own).count()
            })
            .sum()
    };
    let closer = side(a, b) + side(b, a);
    Ok(closer as f64 / (2 * n * n) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn alternating_line_scores_one() {
        // two parallel lines a rung apart: each point's two nearest are its
        // partner on the other line and a neighbor on its own
        let x = Array2::from_shape_fn((6, 2), |(i, j)| if j == 0 { (i / 2) as f64 } else { 0.1 * (i % 2) as f64 });
        let domain = [0, 1, 0, 1, 0, 1];
        let g = KnnGraph::build(x.view(), 2).unwrap();
        let same: usize = (0..6)
            .map(|i| g.neighbors(i).iter().filter(|&&j| domain[j] == domain[i]).count())
            .sum();
        assert_eq!(same, 6);
        assert!((alignment_score(x.view(), &domain, 2).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn separated_domains_score_zero() {
        let x = Array2::from_shape_fn((20, 2), |(i, j)| if i < 10 { (i * j) as f64 * 0.01 } else { 100.0 + (i * j) as f64 * 0.01 });
        let domain: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        assert_eq!(alignment_score(x.view(), &domain, 5).unwrap(), 0.0);
    }

    #[test]
    fn coincident_matches_have_zero_foscttm() {
        let a = Array2::from_shape_fn((15, 3), |(i, j)| (i * 3 + j) as f64);
        assert_eq!(foscttm(a.view(), a.view()).unwrap(), 0.0);
    }

    #[test]
    fn reversed_line_foscttm() {
        // a = 0,1,2 and b = 2,1,0 on a line: hand count of strictly closer points
        let a = array![[0.0], [1.0], [2.0]];
        let b = array![[2.0], [1.0], [0.0]];
        // a0: true match at 2, closer: b1(1), b2(0) -> 2; a1: 0; a2: 2; same for b
        assert!((foscttm(a.view(), b.view()).unwrap() - 8.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn vote_ties_go_to_smallest_class() {
        let refs = array![[0.0], [1.0], [-1.0], [5.0]];
        let labels = [2, 1, 0, 1];
        let q = array![[0.0]];
        // nearest three: 0 (class 2), 1 (class 1), 2 (class 0): a three-way tie
        assert_eq!(label_transfer_accuracy(refs.view(), &labels, q.view(), &[0], 3).unwrap(), 1.0);
        assert_eq!(label_transfer_accuracy(refs.view(), &labels, q.view(), &[2], 1).unwrap(), 1.0);
    }
}
