//! A single CART classification tree grown on a weighted (bootstrap) sample.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        leaf: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
    /// Weighted (in-bag multiplicity) class counts per leaf.
    pub(crate) leaf_counts: Vec<Vec<u32>>,
    /// Unnormalized weighted impurity decrease per feature.
    pub(crate) importance: Vec<f64>,
}

/// Settings for growing one tree.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowConfig {
    pub max_features: usize,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub n_classes: usize,
}

struct Candidate {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    /// Higher score wins; ties go to the lower feature, then the lower threshold.
    fn beats(&self, other: &Candidate) -> bool {
        if self.score != other.score {
            return self.score > other.score;
        }
        (self.feature, self.threshold) < (other.feature, other.threshold)
    }
}

impl Tree {
    /// Grows a tree. `weights[j]` is the multiplicity of row `j` of `x`; rows
    /// with zero weight are ignored.
    pub(crate) fn grow<R: Rng>(
        x: ArrayView2<f64>,
        y: &[usize],
        weights: &[u32],
        cfg: &GrowConfig,
        rng: &mut R,
    ) -> Tree {
        let d = x.ncols();
        let mut tree = Tree {
            nodes: vec![Node::Leaf { leaf: 0 }],
            leaf_counts: Vec::new(),
            importance: vec![0.0; d],
        };
        let root: Vec<usize> = (0..x.nrows()).filter(|&j| weights[j] > 0).collect();
        let root_weight: f64 = root.iter().map(|&j| weights[j] as f64).sum();
        let mut features: Vec<usize> = (0..d).collect();
        let mut stack = vec![(0usize, root, 0usize)];

        while let Some((node_id, samples, depth)) = stack.pop() {
            let counts = class_weights(&samples, y, weights, cfg.n_classes);
            let total: f64 = counts.iter().sum();
            let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
            let depth_capped = cfg.max_depth.is_some_and(|m| depth >= m);
            let split = if pure || depth_capped || total < 2.0 * cfg.min_leaf as f64 {
                None
            } else {
                features.shuffle(rng);
                best_split(x, y, weights, &samples, &counts, &features, cfg)
            };

            match split {
                None => {
                    let leaf = tree.leaf_counts.len() as u32;
                    tree.leaf_counts.push(counts.iter().map(|&c| c as u32).collect());
                    tree.nodes[node_id] = Node::Leaf { leaf };
                }
                Some(best) => {
                    let (left, right): (Vec<usize>, Vec<usize>) = samples
                        .iter()
                        .partition(|&&j| x[[j, best.feature]] <= best.threshold);
                    let gl = class_weights(&left, y, weights, cfg.n_classes);
                    let gr = class_weights(&right, y, weights, cfg.n_classes);
                    let decrease =
                        weighted_gini(&counts) - weighted_gini(&gl) - weighted_gini(&gr);
                    tree.importance[best.feature] += decrease.max(0.0) / root_weight;

                    let left_id = tree.nodes.len();
                    tree.nodes.push(Node::Leaf { leaf: 0 });
                    tree.nodes.push(Node::Leaf { leaf: 0 });
                    tree.nodes[node_id] = Node::Split {
                        feature: best.feature as u32,
                        threshold: best.threshold,
                        left: left_id as u32,
                        right: left_id as u32 + 1,
                    };
                    stack.push((left_id + 1, right, depth + 1));
                    stack.push((left_id, left, depth + 1));
                }
            }
        }
        tree
    }

    /// Terminal leaf id for one feature vector.
    pub fn leaf_of(&self, row: ArrayView1<f64>) -> u32 {
        let mut id = 0usize;
        loop {
            match self.nodes[id] {
                Node::Leaf { leaf } => return leaf,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    id = if row[feature as usize] <= threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_counts.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_class_counts(&self, leaf: u32) -> &[u32] {
        &self.leaf_counts[leaf as usize]
    }

    /// Majority class of a leaf; ties go to the lowest class id.
    pub fn leaf_vote(&self, leaf: u32) -> usize {
        argmax_lowest(self.leaf_class_counts(leaf).iter().map(|&c| c as f64))
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, left as usize).max(walk(nodes, right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

pub(crate) fn argmax_lowest(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

fn class_weights(samples: &[usize], y: &[usize], weights: &[u32], n_classes: usize) -> Vec<f64> {
    let mut counts = vec![0.0; n_classes];
    for &j in samples {
        counts[y[j]] += weights[j] as f64;
    }
    counts
}

/// `W * gini` for class weights summing to `W`.
pub(crate) fn weighted_gini(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    total - counts.iter().map(|c| c * c).sum::<f64>() / total
}

/// Best Gini split among the first `max_features` features of `order`; when
/// none of those admits a split, keeps scanning the remaining features until
/// one does.
fn best_split(
    x: ArrayView2<f64>,
    y: &[usize],
    weights: &[u32],
    samples: &[usize],
    counts: &[f64],
    order: &[usize],
    cfg: &GrowConfig,
) -> Option<Candidate> {
    let total: f64 = counts.iter().sum();
    let min_leaf = cfg.min_leaf as f64;
    let mut best: Option<Candidate> = None;
    let mut sorted = samples.to_vec();

    for (visited, &f) in order.iter().enumerate() {
        if visited >= cfg.max_features && best.is_some() {
            break;
        }
        sorted.sort_unstable_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)));
        let mut left = vec![0.0; counts.len()];
        let mut right = counts.to_vec();
        let mut left_sq = 0.0;
        let mut right_sq: f64 = counts.iter().map(|c| c * c).sum();
        let mut left_w = 0.0;

        for k in 0..sorted.len() - 1 {
            let j = sorted[k];
            let w = weights[j] as f64;
            let c = y[j];
            left_sq += (left[c] + w).powi(2) - left[c].powi(2);
            right_sq += (right[c] - w).powi(2) - right[c].powi(2);
            left[c] += w;
            right[c] -= w;
            left_w += w;

            let (lo, hi) = (x[[j, f]], x[[sorted[k + 1], f]]);
            if lo == hi {
                continue;
            }
            let right_w = total - left_w;
            if left_w < min_leaf || right_w < min_leaf {
                continue;
            }
            let mut threshold = lo + (hi - lo) / 2.0;
            if threshold >= hi {
                threshold = lo;
            }
            let cand = Candidate {
                score: left_sq / left_w + right_sq / right_w,
                feature: f,
                threshold,
            };
            if best.as_ref().is_none_or(|b| cand.beats(b)) {
                best = Some(cand);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(n_classes: usize) -> GrowConfig {
        GrowConfig {
            max_features: 2,
            min_leaf: 1,
            max_depth: None,
            n_classes,
        }
    }

    #[test]
    fn separable_data_gives_pure_leaves() {
        let x = array![[0.0, 5.0], [1.0, 5.0], [2.0, 5.0], [3.0, 5.0]];
        let y = [0, 0, 1, 1];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tree = Tree::grow(x.view(), &y, &[1, 1, 1, 1], &cfg(2), &mut rng);
        assert_eq!(tree.n_leaves(), 2);
        match tree.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 1.5);
            }
            _ => panic!("root should split"),
        }
        for (i, row) in x.outer_iter().enumerate() {
            assert_eq!(tree.leaf_vote(tree.leaf_of(row)), y[i]);
        }
    }

    #[test]
    fn zero_weight_rows_are_ignored() {
        let x = array![[0.0], [1.0], [2.0]];
        let y = [0, 1, 1];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tree = Tree::grow(x.view(), &y, &[0, 2, 1], &cfg(2), &mut rng);
        assert_eq!(tree.n_leaves(), 1);
        assert_eq!(tree.leaf_class_counts(0), &[0, 3]);
    }

    #[test]
    fn duplicate_points_with_conflicting_labels_stop() {
        let x = array![[1.0], [1.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let tree = Tree::grow(x.view(), &[0, 1], &[1, 1], &cfg(2), &mut rng);
        assert_eq!(tree.n_leaves(), 1);
    }

    #[test]
    fn gini_identity() {
        assert_eq!(weighted_gini(&[2.0, 2.0]), 2.0);
        assert_eq!(weighted_gini(&[4.0, 0.0]), 0.0);
    }
}
