//! Partition agreement: NMI and ARI from the contingency table, plus the
//! k-means clustering they are applied to.

use ndarray::ArrayView2;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kmeans::{kmeans, Init, KMeansParams};

/// Counts `n[l][c]` of samples with label `l` in cluster `c`, compacted to the
/// values that occur.
fn contingency(labels: &[usize], clusters: &[usize]) -> Result<Vec<Vec<f64>>> {
    if labels.len() != clusters.len() {
        return Err(Error::dims("labels and clusters differ in length"));
    }
    if labels.is_empty() {
        return Err(Error::data("cannot compare empty partitions"));
    }
    let compact = |v: &[usize]| -> Vec<usize> {
        let mut ids: Vec<usize> = v.to_vec();
        ids.sort_unstable();
        ids.dedup();
        v.iter().map(|x| ids.binary_search(x).expect("present")).collect()
    };
    let (l, c) = (compact(labels), compact(clusters));
    let nl = l.iter().max().map_or(0, |m| m + 1);
    let nc = c.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0.0; nc]; nl];
    for (&a, &b) in l.iter().zip(&c) {
        table[a][b] += 1.0;
    }
    Ok(table)
}

fn entropy(counts: impl Iterator<Item = f64>, n: f64) -> f64 {
    -counts
        .filter(|&x| x > 0.0)
        .map(|x| (x / n) * (x / n).ln())
        .sum::<f64>()
}

/// `2 MI(L, C) / (H(L) + H(C))`. Two single-group partitions are identical and
/// score 1.
pub fn nmi(labels: &[usize], clusters: &[usize]) -> Result<f64> {
    let table = contingency(labels, clusters)?;
    let n = labels.len() as f64;
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..table[0].len()).map(|c| table.iter().map(|r| r[c]).sum()).collect();
    let mut mi = 0.0;
    for (l, row) in table.iter().enumerate() {
        for (c, &x) in row.iter().enumerate() {
            if x > 0.0 {
                mi += (x / n) * (n * x / (rows[l] * cols[c])).ln();
            }
        }
    }
    let h = entropy(rows.into_iter(), n) + entropy(cols.into_iter(), n);
    if h == 0.0 {
        return Ok(1.0);
    }
    Ok((2.0 * mi / h).clamp(0.0, 1.0))
}

/// Pair-counting ARI,
/// `2 (tp tn - fn fp) / ((tp + fn)(fn + tn) + (tp + fp)(fp + tn))`.
/// Identical single-group partitions score 1.
pub fn ari(labels: &[usize], clusters: &[usize]) -> Result<f64> {
    let table = contingency(labels, clusters)?;
    let n = labels.len() as f64;
    let pairs = |x: f64| x * (x - 1.0) / 2.0;
    let same_both: f64 = table.iter().flatten().map(|&x| pairs(x)).sum();
    let same_label: f64 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let same_cluster: f64 = (0..table[0].len())
        .map(|c| pairs(table.iter().map(|r| r[c]).sum()))
        .sum();
    let tp = same_both;
    let fneg = same_label - same_both;
    let fpos = same_cluster - same_both;
    let tn = pairs(n) - same_label - same_cluster + same_both;
    let denom = (tp + fneg) * (fneg + tn) + (tp + fpos) * (fpos + tn);
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok(2.0 * (tp * tn - fneg * fpos) / denom)
}

/// K-means cluster ids with one cluster per distinct label.
pub fn kmeans_clusters(embedding: ArrayView2<f64>, n_clusters: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let params = KMeansParams {
        k: n_clusters,
        iters: 300,
        restarts: 10,
        init: Init::PlusPlus,
    };
    kmeans(embedding, &params, rng).assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_computed_confusion_tables() {
        assert_eq!(nmi(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.0);
        assert_eq!(ari(&[0, 0, 1, 1], &[5, 5, 2, 2]).unwrap(), 1.0);
        assert_eq!(ari(&[0, 1, 0, 1], &[0, 0, 0, 0]).unwrap(), 0.0);
        assert_eq!(nmi(&[0, 1, 0, 1], &[0, 0, 0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn three_by_three_table() {
        // N = [[2,1,0],[0,2,1],[1,0,2]], n = 9
        let labels = [0, 0, 0, 1, 1, 1, 2, 2, 2];
        let clusters = [0, 0, 1, 1, 1, 2, 2, 2, 0];
        let n: f64 = 9.0;
        let mi = 3.0 * ((2.0 / n) * (n * 2.0 / 9.0f64).ln() + (1.0 / n) * (n * 1.0 / 9.0f64).ln());
        let h = 2.0 * 3.0f64.ln();
        assert!((nmi(&labels, &clusters).unwrap() - 2.0 * mi / h).abs() < 1e-12);
        // tp = 3, same label pairs 9, same cluster pairs 9, total 36
        let (tp, fneg, fpos, tn) = (3.0, 6.0, 6.0, 21.0);
        let expected = 2.0 * (tp * tn - fneg * fpos) / ((tp + fneg) * (fneg + tn) + (tp + fpos) * (fpos + tn));
        assert!((ari(&labels, &clusters).unwrap() - expected).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn symmetric_and_permutation_invariant(
            pairs in prop::collection::vec((0usize..4, 0usize..5), 2..60),
            shift in 1usize..7,
        ) {
            let (l, c): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            prop_assert!((nmi(&l, &c).unwrap() - nmi(&c, &l).unwrap()).abs() < 1e-12);
            prop_assert!((ari(&l, &c).unwrap() - ari(&c, &l).unwrap()).abs() < 1e-12);
            let relabeled: Vec<usize> = c.iter().map(|x| (x + shift) % 5 + 10).collect();
            prop_assert!((nmi(&l, &c).unwrap() - nmi(&l, &relabeled).unwrap()).abs() < 1e-12);
            prop_assert!((ari(&l, &c).unwrap() - ari(&l, &relabeled).unwrap()).abs() < 1e-12);
            let v = nmi(&l, &c).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
