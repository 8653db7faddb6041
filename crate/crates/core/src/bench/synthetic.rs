//! Gaussian blob datasets.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::LabeledDomain;
use crate::error::{Error, Result};
use crate::rng::{streams, RngConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlobParams {
    pub n: usize,
    pub dims: usize,
    pub classes: usize,
    /// Centers are uniform in `[-center_box, center_box]^dims`.
    pub center_box: f64,
    pub std: f64,
}

impl Default for BlobParams {
    fn default() -> Self {
        Self {
            n: 1000,
            dims: 10,
            classes: 5,
            center_box: 10.0,
            std: 1.0,
        }
    }
}

/// Sample `i` belongs to class `i % classes`, so classes are balanced and
/// every prefix is nearly balanced.
pub fn blobs(params: &BlobParams, rng: &RngConfig) -> Result<LabeledDomain> {
    let BlobParams { n, dims, classes, center_box, std } = *params;
    if classes == 0 || n < classes || dims == 0 {
        return Err(Error::param(format!(
            "blobs need n >= classes >= 1 and dims >= 1, got n={n} classes={classes} dims={dims}"
        )));
    }
    let normal = Normal::new(0.0, std).map_err(|e| Error::param(format!("blob std: {e}")))?;
    let mut r = rng.stream(streams::SYNTHETIC);
    let centers = Array2::from_shape_fn((classes, dims), |_| r.random_range(-center_box..=center_box));
    let x = Array2::from_shape_fn((n, dims), |(i, j)| centers[[i % classes, j]] + normal.sample(&mut r));
    let labels = (0..n).map(|i| Some(i % classes)).collect();
    let class_names = (0..classes).map(|c| format!("blob{c}")).collect();
    let feature_names = (0..dims).map(|j| format!("x{j}")).collect();
    LabeledDomain::with_names("blobs", x, labels, class_names, feature_names)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_balance() {
        let p = BlobParams { n: 100, dims: 3, classes: 4, ..Default::default() };
        let d = blobs(&p, &RngConfig::new(1)).unwrap();
        assert_eq!((d.len(), d.dim()), (100, 3));
        assert!(d.class_members().iter().all(|m| m.len() == 25));
        assert_eq!(d, blobs(&p, &RngConfig::new(1)).unwrap());
        assert_ne!(d, blobs(&p, &RngConfig::new(2)).unwrap());
    }

    #[test]
    fn rejects_degenerate_shapes() {
        let p = BlobParams { n: 2, classes: 3, ..Default::default() };
        assert!(blobs(&p, &RngConfig::new(0)).is_err());
    }
}
