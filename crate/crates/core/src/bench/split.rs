//! Splitting one labeled dataset into two domains with a known one-to-one
//! correspondence.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use ndarray::{Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::standardize;
use crate::domain::LabeledDomain;
use crate::error::{Error, Result};
use crate::forest::{Forest, ForestParams};
use crate::rng::{streams, RngConfig};

pub const DEFAULT_NOISE_RATIO: usize = 10;
pub const DEFAULT_SIGMA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitKind {
    Random,
    Importance,
    Alternating,
    /// Noise columns per signal column.
    AddNoise { noise_ratio: usize },
    /// Noise scale in units of each feature's standard deviation.
    Distort { sigma: f64 },
    Rotate,
}

impl SplitKind {
    pub const ALL: [SplitKind; 6] = [
        SplitKind::Random,
        SplitKind::Importance,
        SplitKind::Alternating,
        SplitKind::AddNoise { noise_ratio: DEFAULT_NOISE_RATIO },
        SplitKind::Distort { sigma: DEFAULT_SIGMA },
        SplitKind::Rotate,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SplitKind::Random => "random",
            SplitKind::Importance => "importance",
            SplitKind::Alternating => "alternating",
            SplitKind::AddNoise { .. } => "add_noise",
            SplitKind::Distort { .. } => "distort",
            SplitKind::Rotate => "rotate",
        }
    }

    /// Whether the kind divides the feature columns between the domains.
    pub fn partitions_features(&self) -> bool {
        matches!(self, SplitKind::Random | SplitKind::Importance | SplitKind::Alternating)
    }
}

impl fmt::Display for SplitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses a kind name with default parameters.
impl FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SplitKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::param(format!("unknown split kind '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    #[serde(flatten)]
    pub kind: SplitKind,
    pub seed: u64,
}

/// What a split did, enough to regenerate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    #[serde(flatten)]
    pub spec: SplitSpec,
    pub rows: usize,
    pub features_a: Vec<String>,
    pub features_b: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SplitOutput {
    pub a: LabeledDomain,
    pub b: LabeledDomain,
    /// Row `i` of `a` corresponds to row `correspondence[i]` of `b`.
    pub correspondence: Vec<usize>,
    pub manifest: SplitManifest,
}

/// Builds the two domains. Labels are copied unchanged to both; the importance
/// kinds train a forest on the labeled rows.
pub fn split(domain: &LabeledDomain, spec: &SplitSpec) -> Result<SplitOutput> {
    let d = domain.dim();
    if spec.kind.partitions_features() && d < 2 {
        return Err(Error::data(format!("{} split needs at least two features, got {d}", spec.kind)));
    }
    if d == 0 {
        return Err(Error::data("domain has no features"));
    }
    let cfg = RngConfig::new(spec.seed);
    let mut rng = cfg.stream(streams::SPLIT);
    let x = domain.features();
    let names = domain.feature_names();

    let (a_x, a_names, b_x, b_names) = match spec.kind {
        SplitKind::Random => {
            let (left, right) = random_partition(d, &mut rng);
            let (ax, an) = columns(x, names, &left);
            let (bx, bn) = columns(x, names, &right);
            (ax, an, bx, bn)
        }
        SplitKind::Importance | SplitKind::Alternating => {
            let forest = Forest::train(domain, &ForestParams::default(), &cfg.derive(streams::SPLIT))?;
            let order = importance_order(&forest.feature_importance());
            let (left, right) = if spec.kind == SplitKind::Importance {
                halves(&order)
            } else {
                deal_alternating(&order)
            };
            let (ax, an) = columns(x, names, &left);
            let (bx, bn) = columns(x, names, &right);
            (ax, an, bx, bn)
        }
        SplitKind::AddNoise { noise_ratio } => {
            let (z, _) = standardize(x);
            let extra = noise_ratio * d;
            let noise = Array2::from_shape_fn((x.nrows(), extra), |_| StandardNormal.sample(&mut rng));
            let bx = ndarray::concatenate(Axis(1), &[z.view(), noise.view()]).expect("same row count");
            let mut bn = names.to_vec();
            bn.extend((0..extra).map(|k| format!("noise_{k}")));
            (x.clone(), names.to_vec(), bx, bn)
        }
        SplitKind::Distort { sigma } => {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::param(format!("distort sigma must be non-negative, got {sigma}")));
            }
            let mut bx = x.clone();
            if sigma > 0.0 {
                let (_, stds) = standardize(x);
                for mut row in bx.rows_mut() {
                    for (v, sd) in row.iter_mut().zip(&stds) {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *v += sigma * sd * z;
                    }
                }
            }
            (x.clone(), names.to_vec(), bx, names.to_vec())
        }
        SplitKind::Rotate => {
            let q = random_orthogonal(d, &mut rng);
            let bx = x.dot(&q);
            let bn = (0..d).map(|j| format!("rot_{j}")).collect();
            (x.clone(), names.to_vec(), bx, bn)
        }
    };

    let a = domain.with_features(a_x, a_names.clone())?.renamed("A");
    let b = domain.with_features(b_x, b_names.clone())?.renamed("B");
    Ok(SplitOutput {
        correspondence: (0..domain.len()).collect(),
        manifest: SplitManifest {
            spec: *spec,
            rows: domain.len(),
            features_a: a_names,
            features_b: b_names,
        },
        a,
        b,
    })
}

fn columns(x: &Array2<f64>, names: &[String], cols: &[usize]) -> (Array2<f64>, Vec<String>) {
    (x.select(Axis(1), cols), cols.iter().map(|&j| names[j].clone()).collect())
}

/// Each feature to either side with probability one half, redrawn until both
/// sides are nonempty.
fn random_partition(d: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    loop {
        let (left, right): (Vec<usize>, Vec<usize>) = (0..d).partition(|_| rng.random::<bool>());
        if !left.is_empty() && !right.is_empty() {
            return (left, right);
        }
    }
}

/// Features by decreasing importance, ties by index.
pub(crate) fn importance_order(importance: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
    order
}

/// Top `ceil(d/2)` ranks to the first side.
pub(crate) fn halves(order: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let cut = order.len().div_ceil(2);
    let mut left = order[..cut].to_vec();
    let mut right = order[cut..].to_vec();
    left.sort_unstable();
    right.sort_unstable();
    (left, right)
}

/// Even ranks to the first side, odd ranks to the second.
pub(crate) fn deal_alternating(order: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut left: Vec<usize> = order.iter().step_by(2).copied().collect();
    let mut right: Vec<usize> = order.iter().skip(1).step_by(2).copied().collect();
    left.sort_unstable();
    right.sort_unstable();
    (left, right)
}

/// Q factor of a Gaussian matrix with the signs fixed so that R has a positive
/// diagonal, which makes Q Haar-distributed.
fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(&mut *rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    Array2::from_shape_fn((d, d), |(i, j)| {
        let s = if r[(j, j)] < 0.0 { -1.0 } else { 1.0 };
        q[(i, j)] * s
    })
}
