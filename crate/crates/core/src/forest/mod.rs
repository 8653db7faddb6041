//! Random forest classifier with the bootstrap and leaf bookkeeping that the
//! proximity construction needs.

mod io;
mod tree;

pub use tree::{Node, Tree};

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::LabeledDomain;
use crate::error::{Error, Result};
use crate::rng::{streams, RngConfig};
use tree::{argmax_lowest, GrowConfig};

/// Fewest trees for which proximities are considered stable.
pub const MIN_TREES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Candidate features per split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: None,
            min_leaf: 1,
            max_depth: None,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees < MIN_TREES {
            return Err(Error::param(format!(
                "n_trees = {} is below the minimum of {MIN_TREES}",
                self.n_trees
            )));
        }
        if self.min_leaf == 0 {
            return Err(Error::param("min_leaf must be positive"));
        }
        if self.max_features == Some(0) {
            return Err(Error::param("max_features must be positive"));
        }
        Ok(())
    }

    pub fn features_per_split(&self, d: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .clamp(1, d.max(1))
    }
}

/// A trained ensemble. Training rows are the labeled samples of the domain, in
/// ascending domain-index order; "position" below refers to that order.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    params: ForestParams,
    n_features: usize,
    n_classes: usize,
    trees: Vec<Tree>,
    /// Domain index of each training position.
    train_index: Vec<usize>,
    /// `inbag[t][p]`: bootstrap multiplicity of position `p` in tree `t`.
    inbag: Vec<Vec<u32>>,
    /// `train_leaves[t][p]`: terminal leaf of position `p` in tree `t`.
    train_leaves: Vec<Vec<u32>>,
}

impl Forest {
    /// Grows `n_trees` trees on bootstrap resamples of the labeled samples.
    /// Each tree draws from its own random stream, so the result does not
    /// depend on the number of worker threads.
    pub fn train(domain: &LabeledDomain, params: &ForestParams, rng: &RngConfig) -> Result<Forest> {
        params.validate()?;
        let train_index = domain.labeled_indices();
        if train_index.is_empty() {
            return Err(Error::data(format!("{}: no labeled samples to train on", domain.name)));
        }
        let y: Vec<usize> = train_index
            .iter()
            .map(|&i| domain.labels()[i].expect("labeled"))
            .collect();
        let mut present = y.clone();
        present.sort_unstable();
        present.dedup();
        if present.len() < 2 {
            return Err(Error::data(format!(
                "{}: need at least two labeled classes, found {}",
                domain.name,
                present.len()
            )));
        }
        let x = domain.features().select(Axis(0), &train_index);
        let n_l = train_index.len();
        let d = x.ncols();
        let cfg = GrowConfig {
            max_features: params.features_per_split(d),
            min_leaf: params.min_leaf,
            max_depth: params.max_depth,
            n_classes: domain.class_count(),
        };

        let grown: Vec<(Tree, Vec<u32>, Vec<u32>)> = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng.substream(streams::FOREST, t as u64);
                let mut counts = vec![0u32; n_l];
                for _ in 0..n_l {
                    counts[rng.random_range(0..n_l)] += 1;
                }
                let tree = Tree::grow(x.view(), &y, &counts, &cfg, &mut rng);
                let leaves = x.outer_iter().map(|row| tree.leaf_of(row)).collect();
                (tree, counts, leaves)
            })
            .collect();

        let mut trees = Vec::with_capacity(grown.len());
        let mut inbag = Vec::with_capacity(grown.len());
        let mut train_leaves = Vec::with_capacity(grown.len());
        for (tree, counts, leaves) in grown {
            trees.push(tree);
            inbag.push(counts);
            train_leaves.push(leaves);
        }
        Ok(Forest {
            params: *params,
            n_features: d,
            n_classes: domain.class_count(),
            trees,
            train_index,
            inbag,
            train_leaves,
        })
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn train_index(&self) -> &[usize] {
        &self.train_index
    }

    pub fn inbag(&self) -> &[Vec<u32>] {
        &self.inbag
    }

    pub fn train_leaves(&self) -> &[Vec<u32>] {
        &self.train_leaves
    }

    /// Trees in which training position `p` is out of bag.
    pub fn oob_trees(&self, p: usize) -> Vec<usize> {
        (0..self.n_trees()).filter(|&t| self.inbag[t][p] == 0).collect()
    }

    /// Trees in which training position `p` is in bag.
    pub fn inbag_trees(&self, p: usize) -> Vec<usize> {
        (0..self.n_trees()).filter(|&t| self.inbag[t][p] > 0).collect()
    }

    /// Terminal leaf of every query row in every tree (`q x n_trees`).
    pub fn apply(&self, features: ArrayView2<f64>) -> Result<Array2<u32>> {
        if features.ncols() != self.n_features {
            return Err(Error::dims(format!(
                "forest expects {} features, got {}",
                self.n_features,
                features.ncols()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("query features contain NaN or infinite values"));
        }
        let q = features.nrows();
        let mut out = Array2::zeros((q, self.n_trees()));
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(features.axis_iter(Axis(0)).into_par_iter())
            .for_each(|(mut dst, row)| {
                for (t, tree) in self.trees.iter().enumerate() {
                    dst[t] = tree.leaf_of(row);
                }
            });
        Ok(out)
    }

    /// Majority vote over all trees.
    pub fn predict(&self, features: ArrayView2<f64>) -> Result<Vec<usize>> {
        let leaves = self.apply(features)?;
        Ok(leaves
            .outer_iter()
            .map(|row| {
                let mut votes = vec![0.0; self.n_classes];
                for (t, &leaf) in row.iter().enumerate() {
                    votes[self.trees[t].leaf_vote(leaf)] += 1.0;
                }
                argmax_lowest(votes.into_iter())
            })
            .collect())
    }

    /// Out-of-bag vote accuracy over training samples that are out of bag in at
    /// least one tree. `y` holds the labels of the training positions.
    pub fn oob_accuracy(&self, domain: &LabeledDomain) -> f64 {
        let mut correct = 0usize;
        let mut scored = 0usize;
        for (p, &i) in self.train_index.iter().enumerate() {
            let mut votes = vec![0.0; self.n_classes];
            let mut any = false;
            for t in 0..self.n_trees() {
                if self.inbag[t][p] == 0 {
                    votes[self.trees[t].leaf_vote(self.train_leaves[t][p])] += 1.0;
                    any = true;
                }
            }
            if any {
                scored += 1;
                if Some(argmax_lowest(votes.into_iter())) == domain.labels()[i] {
                    correct += 1;
                }
            }
        }
        if scored == 0 {
            0.0
        } else {
            correct as f64 / scored as f64
        }
    }

    /// Mean decrease in Gini impurity per feature, normalized to sum to one.
    pub fn feature_importance(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.n_features];
        for tree in &self.trees {
            let s: f64 = tree.importance.iter().sum();
            if s > 0.0 {
                for (acc, v) in total.iter_mut().zip(&tree.importance) {
                    *acc += v / s;
                }
            }
        }
        let s: f64 = total.iter().sum();
        if s > 0.0 {
            total.iter_mut().for_each(|v| *v /= s);
        } else {
            total.fill(1.0 / self.n_features as f64);
        }
        total
    }
}
