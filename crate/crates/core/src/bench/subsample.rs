//! Matching domain sizes by subsampling the larger one.

use rand::seq::index::sample;

use crate::domain::LabeledDomain;
use crate::error::{Error, Result};
use crate::rng::{streams, RngConfig};

#[derive(Debug, Clone)]
pub struct Subsampled {
    pub a: LabeledDomain,
    pub b: LabeledDomain,
    /// Kept source rows of `a` and `b`, ascending; identity for the smaller side.
    pub rows_a: Vec<usize>,
    pub rows_b: Vec<usize>,
}

/// Largest-remainder apportionment of `target` over strata of the given sizes;
/// remainder ties go to the lower index.
pub fn stratified_counts(sizes: &[usize], target: usize) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return vec![0; sizes.len()];
    }
    let target = target.min(total);
    let quotas: Vec<f64> = sizes.iter().map(|&s| target as f64 * s as f64 / total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut assigned: usize = counts.iter().sum();
    for &s in order.iter().cycle() {
        if assigned >= target {
            break;
        }
        if counts[s] < sizes[s] {
            counts[s] += 1;
            assigned += 1;
        }
    }
    counts
}

/// Class-stratified uniform subsample of the larger domain down to the size of
/// the smaller. Unlabeled rows form their own stratum. A labeled class whose
/// share rounds to zero keeps one sample, taken from the largest stratum, so
/// that every class stays represented.
pub fn subsample_larger(a: &LabeledDomain, b: &LabeledDomain, rng: &RngConfig) -> Result<Subsampled> {
    let (n, m) = (a.len(), b.len());
    if n == m {
        return Ok(Subsampled {
            a: a.clone(),
            b: b.clone(),
            rows_a: (0..n).collect(),
            rows_b: (0..m).collect(),
        });
    }
    let (big, target) = if n > m { (a, m) } else { (b, n) };
    let mut strata = big.class_members();
    let classes = strata.len();
    strata.push(big.unlabeled_indices());
    if target < classes {
        return Err(Error::data(format!(
            "cannot keep {classes} classes in a subsample of {target} rows"
        )));
    }
    let sizes: Vec<usize> = strata.iter().map(Vec::len).collect();
    let mut counts = stratified_counts(&sizes, target);
    for c in 0..classes {
        if counts[c] == 0 {
            let donor = (0..counts.len()).max_by_key(|&s| (counts[s], std::cmp::Reverse(s))).expect("nonempty");
            counts[donor] -= 1;
            counts[c] = 1;
        }
    }
    let mut r = rng.stream(streams::SUBSAMPLE);
    let mut rows = Vec::with_capacity(target);
    for (members, &k) in strata.iter().zip(&counts) {
        rows.extend(sample(&mut r, members.len(), k).into_iter().map(|p| members[p]));
    }
    rows.sort_unstable();
    let reduced = big.subset(&rows)?;
    Ok(if n > m {
        Subsampled { a: reduced, b: b.clone(), rows_a: rows, rows_b: (0..m).collect() }
    } else {
        Subsampled { a: a.clone(), b: reduced, rows_a: (0..n).collect(), rows_b: rows }
    })
}
