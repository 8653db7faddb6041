//! Two-batch simulation: split a dataset in half and corrupt the second half
//! with Gaussian noise and dropout.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::standardize;
use crate::domain::LabeledDomain;
use crate::error::{Error, Result};
use crate::rng::{streams, RngConfig};

pub const NOISE_LEVELS: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
pub const DROPOUT_LEVELS: [f64; 10] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Every (noise, dropout) pair, noise-major.
pub fn batch_grid() -> Vec<(f64, f64)> {
    NOISE_LEVELS
        .iter()
        .flat_map(|&s| DROPOUT_LEVELS.iter().map(move |&p| (s, p)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct BatchPair {
    pub first: LabeledDomain,
    pub second: LabeledDomain,
    /// Source rows of each batch, ascending.
    pub first_rows: Vec<usize>,
    pub second_rows: Vec<usize>,
}

/// Splits each class in half (the odd sample goes to the first batch), then
/// adds `N(0, (noise_sigma * std_j)^2)` to feature `j` of the second batch and
/// zeroes each of its entries with probability `dropout_p`.
pub fn simulate_batches(domain: &LabeledDomain, noise_sigma: f64, dropout_p: f64, rng: &RngConfig) -> Result<BatchPair> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::param(format!("noise sigma must be non-negative, got {noise_sigma}")));
    }
    if !(0.0..1.0).contains(&dropout_p) {
        return Err(Error::param(format!("dropout probability {dropout_p} outside [0, 1)")));
    }
    let mut strata = domain.class_members();
    let unlabeled = domain.unlabeled_indices();
    if !unlabeled.is_empty() {
        strata.push(unlabeled);
    }
    if let Some(c) = domain.class_members().iter().position(|m| m.len() < 2) {
        return Err(Error::data(format!(
            "class '{}' needs at least two samples to appear in both batches",
            domain.class_names()[c]
        )));
    }
    let mut r = rng.stream(streams::BATCHES);
    let mut first_rows = Vec::new();
    let mut second_rows = Vec::new();
    for mut members in strata {
        members.shuffle(&mut r);
        let cut = members.len().div_ceil(2);
        first_rows.extend_from_slice(&members[..cut]);
        second_rows.extend_from_slice(&members[cut..]);
    }
    first_rows.sort_unstable();
    second_rows.sort_unstable();

    let (_, stds) = standardize(domain.features());
    let first = domain.subset(&first_rows)?.renamed("batch1");
    let second = domain.subset(&second_rows)?.renamed("batch2");
    let mut x = second.features().clone();
    if noise_sigma > 0.0 {
        for mut row in x.rows_mut() {
            for (v, sd) in row.iter_mut().zip(&stds) {
                let z: f64 = StandardNormal.sample(&mut r);
                *v += noise_sigma * sd * z;
            }
        }
    }
    if dropout_p > 0.0 {
        x.mapv_inplace(|v| if r.random::<f64>() < dropout_p { 0.0 } else { v });
    }
    let second = second.with_features(x, domain.feature_names().to_vec())?;
    Ok(BatchPair {
        first,
        second,
        first_rows,
        second_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn domain(n: usize, d: usize) -> LabeledDomain {
        let x = Array2::from_shape_fn((n, d), |(i, j)| 1.0 + (i * d + j) as f64 * 0.37);
        let labels = (0..n).map(|i| Some(i % 3)).collect();
        LabeledDomain::new("d", x, labels, 3).unwrap()
    }

    #[test]
    fn grid_has_110_scenarios() {
        let g = batch_grid();
        assert_eq!(g.len(), 110);
        assert_eq!(g[0], (0.0, 0.0));
        assert_eq!(g[109], (1.0, 0.9));
    }

    #[test]
    fn clean_second_batch_copies_rows() {
        let d = domain(31, 4);
        let pair = simulate_batches(&d, 0.0, 0.0, &RngConfig::new(3)).unwrap();
        assert_eq!(pair.first.len() + pair.second.len(), 31);
        for (k, &i) in pair.second_rows.iter().enumerate() {
            assert_eq!(pair.second.features().row(k), d.features().row(i));
        }
        let mut all = pair.first_rows.clone();
        all.extend(&pair.second_rows);
        all.sort_unstable();
        assert_eq!(all, (0..31).collect::<Vec<_>>());
    }

    #[test]
    fn classes_split_evenly() {
        let d = domain(60, 2);
        let pair = simulate_batches(&d, 0.5, 0.2, &RngConfig::new(4)).unwrap();
        let per = |b: &LabeledDomain| b.class_members().iter().map(Vec::len).collect::<Vec<_>>();
        assert_eq!(per(&pair.first), vec![10, 10, 10]);
        assert_eq!(per(&pair.second), vec![10, 10, 10]);
    }

    #[test]
    fn heavy_dropout_zeroes_most_entries() {
        let d = domain(1000, 20);
        let pair = simulate_batches(&d, 0.0, 0.9, &RngConfig::new(5)).unwrap();
        let x = pair.second.features();
        let zeros = x.iter().filter(|&&v| v == 0.0).count() as f64 / x.len() as f64;
        assert!((zeros - 0.9).abs() <= 0.02, "{zeros}");
    }

    #[test]
    fn rejects_singleton_classes_and_bad_levels() {
        let x = Array2::zeros((3, 1));
        let d = LabeledDomain::new("d", x, vec![Some(0), Some(0), Some(1)], 2).unwrap();
        assert!(simulate_batches(&d, 0.0, 0.0, &RngConfig::new(0)).is_err());
        let d = domain(12, 2);
        assert!(simulate_batches(&d, -1.0, 0.0, &RngConfig::new(0)).is_err());
        assert!(simulate_batches(&d, 0.0, 1.0, &RngConfig::new(0)).is_err());
    }
}
