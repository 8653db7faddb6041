//! Leading eigenpairs of a dense symmetric matrix by shifted power iteration
//! with deflation.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const TOLERANCE: f64 = 1e-10;
pub const MAX_ITERS: usize = 10_000;

/// The `k` algebraically largest eigenpairs, in descending order. Eigenvectors
/// are the columns of the returned matrix. The matrix is shifted by its
/// Gershgorin bound so the iteration targets the top of the spectrum.
pub fn top_eigenpairs(b: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, Array2<f64>) {
    let n = b.nrows();
    let k = k.min(n);
    let shift = b
        .outer_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let scale = shift.max(f64::MIN_POSITIVE);
    let mut values = Vec::with_capacity(k);
    let mut vectors = Array2::zeros((n, k));
    for c in 0..k {
        let mut v = Array1::from_shape_fn(n, |_| rng.random::<f64>() - 0.5);
        orthogonalize(&mut v, &vectors, c);
        if !normalize(&mut v) {
            break;
        }
        for _ in 0..MAX_ITERS {
            let bv = b.dot(&v);
            let lambda = v.dot(&bv);
            let mut next = &bv + &(shift * &v);
            orthogonalize(&mut next, &vectors, c);
            if !normalize(&mut next) {
                break;
            }
            let residual = (&bv - &(lambda * &v)).mapv(|x| x * x).sum().sqrt();
            v = next;
            if residual <= TOLERANCE * scale {
                break;
            }
        }
        values.push(v.dot(&b.dot(&v)));
        vectors.column_mut(c).assign(&v);
    }
    let found = values.len();
    (values, vectors.slice(ndarray::s![.., ..found]).to_owned())
}

fn orthogonalize(v: &mut Array1<f64>, basis: &Array2<f64>, count: usize) {
    for c in 0..count {
        let u = basis.column(c);
        let proj = u.dot(v);
        v.scaled_add(-proj, &u);
    }
}

fn normalize(v: &mut Array1<f64>) -> bool {
    let norm = v.dot(v).sqrt();
    if norm <= f64::MIN_POSITIVE || !norm.is_finite() {
        return false;
    }
    v.mapv_inplace(|x| x / norm);
    true
}
