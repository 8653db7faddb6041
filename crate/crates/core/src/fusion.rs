//! Cross-domain affinity propagation through a bijective coupling.

use rayon::prelude::*;

use crate::coupling::Coupling;
use crate::error::{Error, Result};
use crate::sparse::{assemble_joint, AffinityMatrix, CsrMatrix};

/// `W_AB = (W_A T + T W_B) / 2` with `T` the permutation matrix of `coupling`.
///
/// `(W_A T)[i, fwd[k]] = W_A[i, k]` and `(T W_B)[i, j] = W_B[fwd[i], j]`, so
/// both products are pure reindexing.
pub fn propagate(w_a: &AffinityMatrix, w_b: &AffinityMatrix, coupling: &Coupling) -> Result<CsrMatrix> {
    let n = w_a.size();
    if w_b.size() != n || coupling.len() != n {
        return Err(Error::dims(format!(
            "propagation needs equal sizes, got W_A {n}, W_B {}, coupling {}",
            w_b.size(),
            coupling.len()
        )));
    }
    let fwd = coupling.forward();
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut left: Vec<(usize, f64)> = w_a.row_iter(i).map(|(k, v)| (fwd[k], v)).collect();
            left.sort_unstable_by_key(|&(j, _)| j);
            let (rc, rv) = w_b.row(fwd[i]);
            let mut out = Vec::with_capacity(left.len().max(rc.len()));
            let (mut a, mut b) = (0, 0);
            while a < left.len() || b < rc.len() {
                let ja = left.get(a).map_or(usize::MAX, |e| e.0);
                let jb = rc.get(b).copied().unwrap_or(usize::MAX);
                let (j, x, y) = if ja == jb {
                    a += 1;
                    b += 1;
                    (ja, left[a - 1].1, rv[b - 1])
                } else if ja < jb {
                    a += 1;
                    (ja, left[a - 1].1, 0.0)
                } else {
                    b += 1;
                    (jb, 0.0, rv[b - 1])
                };
                out.push((j, 0.5 * (x + y)));
            }
            out
        })
        .collect();
    CsrMatrix::from_rows(n, rows)
}

/// The joint `(n + m)`-square block matrix.
pub fn fuse(w_a: &AffinityMatrix, w_b: &AffinityMatrix, w_ab: &CsrMatrix) -> Result<AffinityMatrix> {
    assemble_joint(w_a, w_b, w_ab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};

    fn random_affinity(n: usize, density: f64, rng: &mut impl Rng) -> AffinityMatrix {
        let mut d = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                if rng.random::<f64>() < density {
                    let v = rng.random::<f64>();
                    d[[i, j]] = v;
                    d[[j, i]] = v;
                }
            }
        }
        AffinityMatrix::new(CsrMatrix::from_dense(&d)).unwrap()
    }

    #[test]
    fn identity_coupling_averages() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let a = random_affinity(10, 0.3, &mut rng);
        let b = random_affinity(10, 0.3, &mut rng);
        let w = propagate(&a, &b, &Coupling::identity(10)).unwrap().to_dense();
        let expect = (a.to_dense() + b.to_dense()) * 0.5;
        assert_eq!(w, expect);
    }

    #[test]
    fn identity_graphs_give_the_permutation() {
        let t = Coupling::new(vec![2, 0, 1]).unwrap();
        let w = propagate(&AffinityMatrix::identity(3), &AffinityMatrix::identity(3), &t).unwrap();
        assert_eq!(w, t.to_matrix());
    }

    #[test]
    fn matches_dense_products() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let a = random_affinity(30, 0.2, &mut rng);
            let b = random_affinity(30, 0.2, &mut rng);
            let mut fwd: Vec<usize> = (0..30).collect();
            fwd.shuffle(&mut rng);
            let t = Coupling::new(fwd).unwrap();
            let td = t.to_matrix().to_dense();
            let oracle = (a.to_dense().dot(&td) + td.dot(&b.to_dense())) * 0.5;
            let w = propagate(&a, &b, &t).unwrap();
            let got = w.to_dense();
            for (x, y) in got.iter().zip(oracle.iter()) {
                assert!((x - y).abs() <= 1e-14);
            }
            assert!(w.max_value() <= a.max_value().max(b.max_value()));
            let joint = fuse(&a, &b, &w).unwrap();
            assert_eq!(joint.transpose(), *joint.matrix());
        }
    }

    #[test]
    fn size_mismatch() {
        let t = Coupling::identity(3);
        assert!(propagate(&AffinityMatrix::identity(3), &AffinityMatrix::identity(4), &t).is_err());
    }
}
