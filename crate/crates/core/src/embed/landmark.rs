//! Landmark compression of a diffusion operator.

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};
use rand_chacha::ChaCha8Rng;

use super::diffusion::DiffusionOperator;
use crate::kmeans::{kmeans, Init, KMeansParams};
use crate::sparse::{AffinityMatrix, CsrMatrix};

/// Width of the random projection used to cluster transition rows.
pub const PROJECTION_DIMS: usize = 32;
const KMEANS_ITERS: usize = 10;

/// Landmark structure: cluster of every point, point-to-landmark transitions
/// and the symmetric landmark affinity.
pub struct Landmarks {
    pub assignment: Vec<usize>,
    /// Row-normalized `W Q`, `n x M`.
    pub point_to_landmark: CsrMatrix,
    /// `(W Q)^T D^-1 (W Q)`; its row normalization is the landmark operator.
    pub affinity: AffinityMatrix,
    /// Members per landmark.
    pub sizes: Vec<f64>,
}

/// Groups points into `m` landmarks by k-means on a seeded Gaussian projection
/// of the transition rows.
pub fn build(op: &DiffusionOperator, m: usize, rng: &mut ChaCha8Rng) -> Landmarks {
    let n = op.len();
    let r = PROJECTION_DIMS.min(n);
    let proj = Array2::from_shape_fn((n, r), |_| {
        let z: f64 = StandardNormal.sample(rng);
        z / (r as f64).sqrt()
    });
    let p = op.transition();
    let mut rows = Array2::<f64>::zeros((n, r));
    for (i, j, v) in p.triplets() {
        rows.row_mut(i).scaled_add(v, &proj.row(j));
    }
    let km = kmeans(
        rows.view(),
        &KMeansParams {
            k: m,
            iters: KMEANS_ITERS,
            restarts: 1,
            init: Init::PlusPlus,
        },
        rng,
    );
    let assignment = km.assignment;
    let m = km.centroids.nrows();

    let w = op.weights();
    let degrees = op.degrees();
    let mut c_rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc: Vec<(usize, f64)> = Vec::new();
        for (j, v) in w.row_iter(i) {
            let l = assignment[j];
            match acc.iter_mut().find(|e| e.0 == l) {
                Some(e) => e.1 += v,
                None => acc.push((l, v)),
            }
        }
        acc.sort_unstable_by_key(|e| e.0);
        c_rows.push(acc);
    }
    let mut k = Array2::<f64>::zeros((m, m));
    for (i, row) in c_rows.iter().enumerate() {
        for &(a, x) in row {
            for &(b, y) in row {
                k[[a, b]] += x * y / degrees[i];
            }
        }
    }
    let k = 0.5 * (&k + &k.t());
    let point_to_landmark = CsrMatrix::from_rows(
        m,
        c_rows
            .into_iter()
            .enumerate()
            .map(|(i, row)| row.into_iter().map(|(l, v)| (l, v / degrees[i])).collect())
            .collect(),
    )
    .expect("valid rows");
    let mut sizes = vec![0.0; m];
    for &a in &assignment {
        sizes[a] += 1.0;
    }
    Landmarks {
        sizes,
        assignment,
        point_to_landmark,
        affinity: AffinityMatrix::new(CsrMatrix::from_dense(&k)).expect("symmetric by construction"),
    }
}

/// `P_nm Y`.
pub fn place(landmarks: &Landmarks, coords: &Array2<f64>) -> Array2<f64> {
    let p = &landmarks.point_to_landmark;
    let mut out = Array2::zeros((p.nrows(), coords.ncols()));
    for (i, l, v) in p.triplets() {
        out.row_mut(i).scaled_add(v, &coords.row(l));
    }
    out
}
