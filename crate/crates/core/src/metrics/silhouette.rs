//! Silhouette-based scores: label ASW, isolated-label ASW and the batch
//! removal silhouette (BRAS).

use ndarray::{ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kmeans::sq_dist;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Separation {
    /// `b(i)`: smallest mean distance to another group.
    NearestGroup,
    /// `b(i)`: mean distance to every sample outside the own group.
    AllOthers,
}

fn compact(ids: &[usize]) -> (Vec<usize>, usize) {
    let mut uniq = ids.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    let mapped = ids.iter().map(|x| uniq.binary_search(x).expect("present")).collect();
    (mapped, uniq.len())
}

/// Silhouette `s(i) = (b - a) / max(a, b)` per sample; a sample that is alone
/// in its group, or the only group, gets 0.
fn silhouette_samples(x: ArrayView2<f64>, groups: &[usize], separation: Separation) -> Vec<f64> {
    let (g, n_groups) = compact(groups);
    let mut sizes = vec![0usize; n_groups];
    for &k in &g {
        sizes[k] += 1;
    }
    (0..x.nrows())
        .into_par_iter()
        .map(|i| {
            let own = g[i];
            if sizes[own] < 2 || n_groups < 2 {
                return 0.0;
            }
            let mut sums = vec![0.0; n_groups];
            for j in 0..x.nrows() {
                if j != i {
                    sums[g[j]] += sq_dist(x.row(i), x.row(j)).sqrt();
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = match separation {
                Separation::NearestGroup => (0..n_groups)
                    .filter(|&k| k != own)
                    .map(|k| sums[k] / sizes[k] as f64)
                    .fold(f64::INFINITY, f64::min),
                Separation::AllOthers => {
                    let total: f64 = (0..n_groups).filter(|&k| k != own).map(|k| sums[k]).sum();
                    total / (x.nrows() - sizes[own]) as f64
                }
            };
            let scale = a.max(b);
            if scale > 0.0 {
                (b - a) / scale
            } else {
                0.0
            }
        })
        .collect()
}

fn check(x: ArrayView2<f64>, ids: &[usize]) -> Result<()> {
    if x.nrows() != ids.len() {
        return Err(Error::dims("one id per embedded point"));
    }
    if ids.is_empty() {
        return Err(Error::data("silhouette of an empty embedding"));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Label ASW rescaled to `[0, 1]` by `(asw + 1) / 2`.
pub fn silhouette_label(x: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
    check(x, labels)?;
    let s = silhouette_samples(x, labels, Separation::NearestGroup);
    Ok((mean(&s) + 1.0) / 2.0)
}

/// Labels present in the fewest batches, each scored by the rescaled ASW of
/// the binary partition (that label against all others), then averaged.
pub fn isolated_labels(x: ArrayView2<f64>, labels: &[usize], batches: &[usize]) -> Result<f64> {
    check(x, labels)?;
    check(x, batches)?;
    let mut present: Vec<(usize, usize)> = labels.iter().copied().zip(batches.iter().copied()).collect();
    present.sort_unstable();
    present.dedup();
    let mut uniq: Vec<usize> = labels.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    let counts: Vec<usize> = uniq
        .iter()
        .map(|&l| present.iter().filter(|(pl, _)| *pl == l).count())
        .collect();
    let fewest = *counts.iter().min().expect("non-empty");
    let scores: Vec<f64> = uniq
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c == fewest)
        .map(|(&l, _)| {
            let binary: Vec<usize> = labels.iter().map(|&y| usize::from(y == l)).collect();
            (mean(&silhouette_samples(x, &binary, Separation::NearestGroup)) + 1.0) / 2.0
        })
        .collect();
    Ok(mean(&scores))
}

/// Per cell type, silhouette with batches as groups and `b(i)` the mean
/// distance to all other-batch cells; scored `mean(1 - |s(i)|)` and averaged
/// over cell types. Cell types seen in a single batch are skipped; if none
/// remain the score is 1.
pub fn bras(x: ArrayView2<f64>, batches: &[usize], labels: &[usize]) -> Result<f64> {
    check(x, labels)?;
    check(x, batches)?;
    let (l, n_labels) = compact(labels);
    let mut per_label = Vec::new();
    for c in 0..n_labels {
        let rows: Vec<usize> = (0..l.len()).filter(|&i| l[i] == c).collect();
        let b: Vec<usize> = rows.iter().map(|&i| batches[i]).collect();
        if compact(&b).1 < 2 {
            continue;
        }
        let sub = x.select(Axis(0), &rows);
        let s = silhouette_samples(sub.view(), &b, Separation::AllOthers);
        per_label.push(mean(&s.iter().map(|v| 1.0 - v.abs()).collect::<Vec<_>>()));
    }
    if per_label.is_empty() {
        return Ok(1.0);
    }
    Ok(mean(&per_label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn separated_tight_clusters_score_near_one() {
        let x = Array2::from_shape_fn((20, 2), |(i, j)| (i / 10) as f64 * 100.0 + (i % 10 + j) as f64 * 0.01);
        let labels: Vec<usize> = (0..20).map(|i| i / 10).collect();
        assert!(silhouette_label(x.view(), &labels).unwrap() > 0.99);
    }

    #[test]
    fn singletons_score_half() {
        let x = array![[0.0], [1.0], [5.0]];
        assert_eq!(silhouette_label(x.view(), &[0, 1, 2]).unwrap(), 0.5);
    }

    #[test]
    fn four_point_bras_by_hand() {
        // one cell type, batches 0 0 1 1 at 0, 1, 3, 7 on a line
        let x = array![[0.0], [1.0], [3.0], [7.0]];
        let batches = [0, 0, 1, 1];
        let labels = [0, 0, 0, 0];
        let s = |a: f64, b: f64| (b - a) / a.max(b);
        let s0 = s(1.0, (3.0 + 7.0) / 2.0);
        let s1 = s(1.0, (2.0 + 6.0) / 2.0);
        let s2 = s(4.0, (3.0 + 2.0) / 2.0);
        let s3 = s(4.0, (7.0 + 6.0) / 2.0);
        let expected = [s0, s1, s2, s3].iter().map(|v: &f64| 1.0 - v.abs()).sum::<f64>() / 4.0;
        assert!((bras(x.view(), &batches, &labels).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn separated_batches_have_low_bras() {
        let x = Array2::from_shape_fn((40, 2), |(i, j)| (i % 2) as f64 * 1000.0 + ((i / 2) * (j + 1)) as f64 * 0.01);
        let batches: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let labels = vec![0; 40];
        assert!(bras(x.view(), &batches, &labels).unwrap() < 0.02);
    }

    #[test]
    fn isolated_label_far_away_scores_high() {
        // label 2 only in batch 0 and far away; labels 0 and 1 in both batches
        let x = Array2::from_shape_fn((30, 2), |(i, j)| {
            let base = if i < 10 { 500.0 } else { 0.0 };
            base + ((i * (j + 3)) % 7) as f64 * 0.1
        });
        let labels: Vec<usize> = (0..30).map(|i| if i < 10 { 2 } else { i % 2 }).collect();
        let batches: Vec<usize> = (0..30).map(|i| if i < 10 { 0 } else { (i / 2) % 2 }).collect();
        assert!(isolated_labels(x.view(), &labels, &batches).unwrap() > 0.98);
    }

    #[test]
    fn every_label_isolated_when_all_share_batches() {
        let x = Array2::from_shape_fn((12, 1), |(i, _)| (i % 3) as f64 * 10.0 + (i / 3) as f64 * 0.1);
        let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let batches: Vec<usize> = (0..12).map(|i| (i / 3) % 2).collect();
        let per_label: Vec<f64> = (0..3)
            .map(|l| {
                let binary: Vec<usize> = labels.iter().map(|&y| usize::from(y == l)).collect();
                silhouette_label(x.view(), &binary).unwrap()
            })
            .collect();
        let expected = per_label.iter().sum::<f64>() / 3.0;
        assert!((isolated_labels(x.view(), &labels, &batches).unwrap() - expected).abs() < 1e-12);
    }
}
