//! Lloyd's k-means with deterministic seeding, shared by the transport
//! partitioner, landmark selection and the clustering metrics.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Start from a random index, then repeatedly take the point farthest from
    /// the chosen centers (lowest index on ties).
    FarthestPoint,
    /// D^2 sampling.
    PlusPlus,
}

#[derive(Debug, Clone)]
pub struct KMeansParams {
    pub k: usize,
    pub iters: usize,
    pub restarts: usize,
    pub init: Init,
}

#[derive(Debug, Clone)]
pub struct KMeans {
    pub centroids: Array2<f64>,
    pub assignment: Vec<usize>,
    pub inertia: f64,
}

pub fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    match (a.as_slice(), b.as_slice()) {
        (Some(x), Some(y)) => sq_dist_slice(x, y),
        _ => a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum(),
    }
}

/// Four independent accumulators so the loop vectorizes.
pub fn sq_dist_slice(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| (x - y) * (x - y)).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            let d = x[k] - y[k];
            acc[k] += d * d;
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Best of `restarts` runs by inertia (first run wins ties).
pub fn kmeans(x: ArrayView2<f64>, params: &KMeansParams, rng: &mut ChaCha8Rng) -> KMeans {
    let n = x.nrows();
    let k = params.k.clamp(1, n.max(1));
    let mut best: Option<KMeans> = None;
    for _ in 0..params.restarts.max(1) {
        let init = match params.init {
            Init::FarthestPoint => farthest_point_seeds(x, k, rng.random_range(0..n)),
            Init::PlusPlus => plus_plus_seeds(x, k, rng),
        };
        let run = lloyd(x, init, params.iters);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    best.expect("at least one restart")
}

pub fn farthest_point_seeds(x: ArrayView2<f64>, k: usize, start: usize) -> Array2<f64> {
    let n = x.nrows();
    let mut chosen = vec![start];
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(start))).collect();
    while chosen.len() < k {
        let mut far = 0;
        for i in 1..n {
            if dist[i] > dist[far] {
                far = i;
            }
        }
        chosen.push(far);
        for i in 0..n {
            dist[i] = dist[i].min(sq_dist(x.row(i), x.row(far)));
        }
    }
    x.select(Axis(0), &chosen)
}

fn plus_plus_seeds(x: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = x.nrows();
    let first = rng.random_range(0..n);
    let mut chosen = vec![first];
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(first))).collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if u < d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        chosen.push(next);
        for i in 0..n {
            dist[i] = dist[i].min(sq_dist(x.row(i), x.row(next)));
        }
    }
    x.select(Axis(0), &chosen)
}

fn nearest(row: ArrayView1<f64>, centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.outer_iter().enumerate() {
        let d = sq_dist(row, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd iterations from the given centers until assignments stop changing.
/// A cluster that empties is re-seeded at the point farthest from its center.
pub fn lloyd(x: ArrayView2<f64>, mut centroids: Array2<f64>, iters: usize) -> KMeans {
    let n = x.nrows();
    let k = centroids.nrows();
    let mut assignment = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    for _ in 0..iters.max(1) {
        let mut changed = false;
        for i in 0..n {
            let (c, d) = nearest(x.row(i), &centroids);
            if assignment[i] != c {
                assignment[i] = c;
                changed = true;
            }
            dist[i] = d;
        }
        if !changed {
            break;
        }
        let mut sums = Array2::<f64>::zeros(centroids.raw_dim());
        let mut counts = vec![0usize; k];
        for i in 0..n {
            sums.row_mut(assignment[i]).scaled_add(1.0, &x.row(i));
            counts[assignment[i]] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                let mean = &sums.row(c) / counts[c] as f64;
                centroids.row_mut(c).assign(&mean);
            } else {
                let mut far = 0;
                for i in 1..n {
                    if dist[i] > dist[far] {
                        far = i;
                    }
                }
                centroids.row_mut(c).assign(&x.row(far));
                dist[far] = 0.0;
            }
        }
    }
    let mut inertia = 0.0;
    for i in 0..n {
        let (c, d) = nearest(x.row(i), &centroids);
        assignment[i] = c;
        inertia += d;
    }
    KMeans {
        centroids,
        assignment,
        inertia,
    }
}
