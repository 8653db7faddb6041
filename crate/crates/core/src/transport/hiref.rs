//! Hierarchical refinement: recursive balanced co-partitioning of source and
//! target in semantic space, with exact assignment on small blocks.
//!
//! Each split cuts the source into `branching` capacity-balanced k-means parts.
//! Both sides are then quantized by one set of micro-cluster centers, and a
//! small integer transportation plan between (micro-cluster, part) supplies and
//! target micro-clusters decides how many target points of every region join
//! each part. Target points inside a micro-cluster are ranked with the same
//! center distances the source cut used, so identical inputs split identically.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exact::exact_assignment;
use crate::coupling::Coupling;
use crate::error::{Error, Result};
use crate::kmeans::{farthest_point_seeds, lloyd, sq_dist, KMeans};
use crate::rng::{mix, streams, RngConfig};
use crate::semantic::{SemanticCost, SemanticProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HiRefParams {
    pub base_size: usize,
    pub branching: usize,
    pub kmeans_iters: usize,
    pub restarts: usize,
}

impl Default for HiRefParams {
    fn default() -> Self {
        Self {
            base_size: 64,
            branching: 2,
            kmeans_iters: 50,
            restarts: 4,
        }
    }
}

impl HiRefParams {
    pub fn validate(&self) -> Result<()> {
        if self.base_size < 2 {
            return Err(Error::param("base_size must be at least 2"));
        }
        if self.branching < 2 {
            return Err(Error::param("branching must be at least 2"));
        }
        if self.kmeans_iters == 0 || self.restarts == 0 {
            return Err(Error::param("kmeans_iters and restarts must be positive"));
        }
        Ok(())
    }
}

/// Micro-clusters per split used to route target points.
const MICRO_CLUSTERS: usize = 32;

/// A leaf of the co-partition: equal-size source and target index sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
}

/// Approximate optimal bijection between two normalized profiles.
pub fn hiref(src: &SemanticProfile, dst: &SemanticProfile, params: &HiRefParams, rng: &RngConfig) -> Result<Coupling> {
    let cost = SemanticCost::new(src, dst)?;
    let blocks = co_partition(src, dst, params, rng)?;
    let forward = solve_blocks(&cost, &blocks)?;
    Coupling::new(forward)
}

fn solve_blocks(cost: &SemanticCost, blocks: &[Block]) -> Result<Vec<usize>> {
    let pairs: Vec<Vec<(usize, usize)>> = blocks
        .par_iter()
        .map(|b| {
            let a = exact_assignment(b.src.len(), |i, j| cost.cost(b.src[i], b.dst[j]), usize::MAX)?;
            Ok(a.coupling
                .forward()
                .iter()
                .enumerate()
                .map(|(i, &j)| (b.src[i], b.dst[j]))
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut forward = vec![usize::MAX; cost.src().len()];
    for (i, j) in pairs.into_iter().flatten() {
        forward[i] = j;
    }
    Ok(forward)
}

/// The leaf blocks the hierarchical solver assigns exactly, in a fixed order.
pub fn co_partition(
    src: &SemanticProfile,
    dst: &SemanticProfile,
    params: &HiRefParams,
    rng: &RngConfig,
) -> Result<Vec<Block>> {
    params.validate()?;
    if !src.is_normalized() || !dst.is_normalized() {
        return Err(Error::param("hierarchical transport needs normalized profiles"));
    }
    if src.len() != dst.len() {
        return Err(Error::dims(format!(
            "bijective transport needs equal sizes, got {} and {}; subsample the larger domain",
            src.len(),
            dst.len()
        )));
    }
    if src.is_empty() {
        return Err(Error::data("cannot transport empty profiles"));
    }
    if src.n_classes() != dst.n_classes() {
        return Err(Error::dims("profiles have different class counts"));
    }
    let root = Block {
        src: (0..src.len()).collect(),
        dst: (0..dst.len()).collect(),
    };
    let ctx = Context {
        src: src.matrix().view(),
        dst: dst.matrix().view(),
        params,
        seed: rng.seed,
    };
    Ok(ctx.refine(root, 1))
}

struct Context<'a> {
    src: ArrayView2<'a, f64>,
    dst: ArrayView2<'a, f64>,
    params: &'a HiRefParams,
    seed: u64,
}

impl Context<'_> {
    fn refine(&self, block: Block, node: u64) -> Vec<Block> {
        let n = block.src.len();
        if n <= self.params.base_size {
            return vec![block];
        }
        let children = self.split(&block, node);
        children
            .into_par_iter()
            .enumerate()
            .flat_map_iter(|(k, child)| self.refine(child, mix(node, k as u64 + 1)))
            .collect::<Vec<_>>()
    }

    fn split(&self, block: &Block, node: u64) -> Vec<Block> {
        let n = block.src.len();
        let b = self.params.branching.min(n);
        let caps: Vec<usize> = (0..b).map(|p| n / b + usize::from(p < n % b)).collect();
        let xs = self.src.select(Axis(0), &block.src);
        let xd = self.dst.select(Axis(0), &block.dst);
        let mut rng = RngConfig::new(self.seed).substream(streams::HIREF, node);

        // balanced source split
        let mut km: Option<KMeans> = None;
        for _ in 0..self.params.restarts {
            let start = rng.random_range(0..n);
            let run = lloyd(xs.view(), farthest_point_seeds(xs.view(), b, start), self.params.kmeans_iters);
            if km.as_ref().is_none_or(|best| run.inertia < best.inertia) {
                km = Some(run);
            }
        }
        let centers = km.expect("restarts >= 1").centroids;
        let src_key = center_distances(xs.view(), &centers);
        let dst_key = center_distances(xd.view(), &centers);
        let src_parts = balanced_assign(&src_key, &caps);

        // micro-clusters quantize both sides with the same centers; the plan
        // between (micro-cluster, part) supplies and target micro-clusters
        // fixes how many target points of each region go to each part
        let k = MICRO_CLUSTERS.min(n);
        let seeds = farthest_point_seeds(xs.view(), k, rng.random_range(0..n));
        let micro = lloyd(xs.view(), seeds, self.params.kmeans_iters);
        let src_micro = micro.assignment;
        let dst_micro: Vec<usize> = xd.outer_iter().map(|y| nearest(y, &micro.centroids)).collect();
        let mut supply = vec![0usize; k * b];
        let mut demand = vec![0usize; k];
        for i in 0..n {
            supply[src_micro[i] * b + src_parts[i]] += 1;
            demand[dst_micro[i]] += 1;
        }
        let flow = transportation(&supply, &demand, |s, q| {
            sq_dist(micro.centroids.row(s / b), micro.centroids.row(q))
        });

        let mut dst_parts = vec![0; n];
        for q in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| dst_micro[i] == q).collect();
            if members.is_empty() {
                continue;
            }
            let mut quota = vec![0usize; b];
            for (s, row) in flow.iter().enumerate() {
                quota[s % b] += row[q];
            }
            let key: Vec<Vec<f64>> = members.iter().map(|&i| dst_key[i].clone()).collect();
            for (&i, g) in members.iter().zip(balanced_assign(&key, &quota)) {
                dst_parts[i] = g;
            }
        }

        (0..b)
            .map(|p| Block {
                src: gather(&block.src, &src_parts, p),
                dst: gather(&block.dst, &dst_parts, p),
            })
            .collect()
    }
}

fn nearest(x: ndarray::ArrayView1<f64>, centers: &Array2<f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (m, c) in centers.outer_iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (m, d);
        }
    }
    best.0
}

/// Integer min-cost transportation plan by successive shortest paths
/// (Bellman-Ford on the residual graph). `flow[p][q]` units go from supply
/// `p` to demand `q`; totals must agree.
fn transportation(supply: &[usize], demand: &[usize], cost: impl Fn(usize, usize) -> f64) -> Vec<Vec<usize>> {
    let (k, l) = (supply.len(), demand.len());
    let c: Vec<Vec<f64>> = (0..k).map(|p| (0..l).map(|q| cost(p, q)).collect()).collect();
    let mut flow = vec![vec![0usize; l]; k];
    let mut left_s = supply.to_vec();
    let mut left_d = demand.to_vec();
    // nodes: supplies 0..k, demands k..k+l
    loop {
        let mut dist = vec![f64::INFINITY; k + l];
        let mut prev = vec![usize::MAX; k + l];
        for p in 0..k {
            if left_s[p] > 0 {
                dist[p] = 0.0;
            }
        }
        for _ in 0..k + l {
            let mut changed = false;
            for p in 0..k {
                if dist[p].is_finite() {
                    for q in 0..l {
                        let nd = dist[p] + c[p][q];
                        if nd < dist[k + q] - 1e-15 {
                            dist[k + q] = nd;
                            prev[k + q] = p;
                            changed = true;
                        }
                    }
                }
            }
            for q in 0..l {
                if dist[k + q].is_finite() {
                    for p in 0..k {
                        if flow[p][q] > 0 {
                            let nd = dist[k + q] - c[p][q];
                            if nd < dist[p] - 1e-15 {
                                dist[p] = nd;
                                prev[p] = k + q;
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let target = (0..l)
            .filter(|&q| left_d[q] > 0 && dist[k + q].is_finite())
            .min_by(|&a, &b| dist[k + a].total_cmp(&dist[k + b]).then(a.cmp(&b)));
        let Some(q_end) = target else { break };
        // walk back to a supply root, collecting the bottleneck
        let mut path = Vec::new();
        let mut node = k + q_end;
        let mut amount = left_d[q_end];
        loop {
            if node >= k {
                let p = prev[node];
                path.push((p, node - k, true));
                node = p;
            } else {
                if prev[node] == usize::MAX {
                    amount = amount.min(left_s[node]);
                    break;
                }
                let q = prev[node] - k;
                amount = amount.min(flow[node][q]);
                path.push((node, q, false));
                node = k + q;
            }
        }
        let root = node;
        for &(p, q, forward) in &path {
            if forward {
                flow[p][q] += amount;
            } else {
                flow[p][q] -= amount;
            }
        }
        left_s[root] -= amount;
        left_d[q_end] -= amount;
    }
    flow
}

fn gather(index: &[usize], parts: &[usize], p: usize) -> Vec<usize> {
    index
        .iter()
        .zip(parts)
        .filter(|&(_, &q)| q == p)
        .map(|(&i, _)| i)
        .collect()
}

fn center_distances(x: ArrayView2<f64>, centers: &Array2<f64>) -> Vec<Vec<f64>> {
    x.outer_iter()
        .map(|row| centers.outer_iter().map(|c| sq_dist(row, c)).collect())
        .collect()
}

/// Assigns every point to a part so that part `p` receives exactly `caps[p]`
/// points. Two parts: sort by distance difference. More: greedy by regret.
fn balanced_assign(dist: &[Vec<f64>], caps: &[usize]) -> Vec<usize> {
    let n = dist.len();
    let b = caps.len();
    let mut parts = vec![0; n];
    if b == 2 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            (dist[i][0] - dist[i][1])
                .total_cmp(&(dist[j][0] - dist[j][1]))
                .then(i.cmp(&j))
        });
        for (rank, &i) in order.iter().enumerate() {
            parts[i] = usize::from(rank >= caps[0]);
        }
        return parts;
    }
    let prefs: Vec<Vec<usize>> = dist
        .iter()
        .map(|d| {
            let mut p: Vec<usize> = (0..b).collect();
            p.sort_by(|&a, &c| d[a].total_cmp(&d[c]).then(a.cmp(&c)));
            p
        })
        .collect();
    let regret = |i: usize| dist[i][prefs[i][1]] - dist[i][prefs[i][0]];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| regret(j).total_cmp(&regret(i)).then(i.cmp(&j)));
    let mut left = caps.to_vec();
    for i in order {
        let p = *prefs[i].iter().find(|&&p| left[p] > 0).expect("capacity sums to n");
        left[p] -= 1;
        parts[i] = p;
    }
    parts
}
