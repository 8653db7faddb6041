//! Diffusion operator, automatic diffusion time and potential distances.

use nalgebra::DMatrix;
use ndarray::{Array2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kmeans::sq_dist_slice;
use crate::sparse::{AffinityMatrix, CsrMatrix};

pub const MAX_TIME: usize = 64;
pub const FALLBACK_TIME: usize = 8;

/// `P = D^-1 W`, keeping `W` and the degrees for the symmetric conjugate.
#[derive(Debug, Clone)]
pub struct DiffusionOperator {
    weights: CsrMatrix,
    degrees: Vec<f64>,
    transition: CsrMatrix,
}

/// Rows of `W` with no mass get a self-loop equal to the smallest positive
/// entry of `W` (1 if `W` is all zero).
pub fn diffusion_operator(w: &AffinityMatrix) -> DiffusionOperator {
    let n = w.size();
    let floor = w.values().iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
    let floor = if floor.is_finite() { floor } else { 1.0 };
    let sums = w.row_sums();
    let weights = if sums.iter().any(|&s| s <= 0.0) {
        let rows = (0..n)
            .map(|i| {
                let mut row: Vec<(usize, f64)> = w.row_iter(i).collect();
                if sums[i] <= 0.0 {
                    row.retain(|&(j, _)| j != i);
                    row.push((i, floor));
                }
                row
            })
            .collect();
        CsrMatrix::from_rows(n, rows).expect("valid rows")
    } else {
        w.matrix().clone()
    };
    let degrees = weights.row_sums();
    let rows = (0..n)
        .map(|i| weights.row_iter(i).map(|(j, v)| (j, v / degrees[i])).collect())
        .collect();
    let transition = CsrMatrix::from_rows(n, rows).expect("valid rows");
    DiffusionOperator {
        weights,
        degrees,
        transition,
    }
}

impl DiffusionOperator {
    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn transition(&self) -> &CsrMatrix {
        &self.transition
    }

    pub fn weights(&self) -> &CsrMatrix {
        &self.weights
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// `D^-1/2 W D^-1/2`, similar to `P` and symmetric.
    pub fn symmetric_conjugate(&self) -> Array2<f64> {
        let n = self.len();
        let mut a = Array2::zeros((n, n));
        for (i, j, v) in self.weights.triplets() {
            a[[i, j]] = v / (self.degrees[i] * self.degrees[j]).sqrt();
        }
        a
    }

    /// Eigenvalues of `P` via its symmetric conjugate.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        let n = self.len();
        let a = self.symmetric_conjugate();
        let a = 0.5 * (&a + &a.t());
        let m = DMatrix::from_fn(n, n, |i, j| a[[i, j]]);
        let values = m.symmetric_eigenvalues();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite spectrum of the diffusion operator".into()));
        }
        Ok(values.iter().copied().collect())
    }
}

/// Von Neumann entropy of the normalized spectrum `|lambda|^t` for `t = 1..=max_t`.
pub fn entropy_curve(eigenvalues: &[f64], max_t: usize) -> Vec<f64> {
    (1..=max_t)
        .map(|t| {
            let powered: Vec<f64> = eigenvalues.iter().map(|l| l.abs().powi(t as i32)).collect();
            let total: f64 = powered.iter().sum();
            if total <= 0.0 {
                return 0.0;
            }
            -powered
                .iter()
                .map(|&x| x / total)
                .filter(|&p| p > 0.0)
                .map(|p| p * p.ln())
                .sum::<f64>()
        })
        .collect()
}

/// Index of the point farthest from the chord joining the curve's ends, after
/// scaling both axes to `[0, 1]`; the first maximum wins.
pub fn knee(curve: &[f64]) -> usize {
    let n = curve.len();
    if n < 3 {
        return 0;
    }
    let (lo, hi) = curve.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    let span = hi - lo;
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .enumerate()
        .map(|(i, &y)| (i as f64 / (n - 1) as f64, (y - lo) / span))
        .collect();
    let (x0, y0) = pts[0];
    let (x1, y1) = pts[n - 1];
    let (dx, dy) = (x1 - x0, y1 - y0);
    let len = (dx * dx + dy * dy).sqrt();
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &(x, y)) in pts.iter().enumerate() {
        let d = ((x - x0) * dy - (y - y0) * dx).abs() / len;
        if d > best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// Diffusion time at the knee of the entropy curve, or the fallback when the
/// curve is flat.
pub fn auto_time(op: &DiffusionOperator) -> Result<usize> {
    let curve = entropy_curve(&op.spectrum()?, MAX_TIME);
    let (lo, hi) = curve.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    if hi - lo < 1e-6 {
        return Ok(FALLBACK_TIME);
    }
    Ok((knee(&curve) + 1).clamp(1, MAX_TIME))
}

/// `P^t` by repeated squaring.
pub fn matrix_power(p: &Array2<f64>, t: usize) -> Array2<f64> {
    let mut result: Option<Array2<f64>> = None;
    let mut base = p.clone();
    let mut e = t;
    while e > 0 {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => r.dot(&base),
            });
        }
        e >>= 1;
        if e > 0 {
            base = base.dot(&base);
        }
    }
    result.unwrap_or_else(|| Array2::eye(p.nrows()))
}

/// `U_ij = || log(Pt_i + eps) - log(Pt_j + eps) ||_2`, optionally with a
/// weight per coordinate.
pub fn potential_distances(pt: &Array2<f64>, eps: f64, weights: Option<&[f64]>) -> Array2<f64> {
    let mut logs = pt.mapv(|v| (v + eps).ln());
    if let Some(w) = weights {
        for (mut col, &wt) in logs.axis_iter_mut(Axis(1)).zip(w) {
            col.mapv_inplace(|v| v * wt.sqrt());
        }
    }
    let n = logs.nrows();
    let logs = logs.as_standard_layout();
    let norms: Vec<f64> = logs.rows().into_iter().map(|r| r.dot(&r)).collect();
    let gram = logs.dot(&logs.t());
    let mut d = Array2::zeros((n, n));
    d.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            for j in i + 1..n {
                let scale = norms[i] + norms[j];
                let sq = scale - 2.0 * gram[[i, j]];
                // cancellation leaves too few digits here; sum the differences directly
                row[j] = if sq <= 1e-6 * scale {
                    let (a, b) = (logs.row(i), logs.row(j));
                    sq_dist_slice(a.as_slice().expect("standard layout"), b.as_slice().expect("standard layout")).sqrt()
                } else {
                    sq.sqrt()
                };
            }
        });
    for i in 0..n {
        for j in 0..i {
            d[[i, j]] = d[[j, i]];
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn affinity(d: Array2<f64>) -> AffinityMatrix {
        AffinityMatrix::new(CsrMatrix::from_dense(&d)).unwrap()
    }

    #[test]
    fn identity_and_uniform() {
        let p = diffusion_operator(&AffinityMatrix::identity(3));
        assert_eq!(p.transition().to_dense(), Array2::eye(3));
        let p = diffusion_operator(&affinity(Array2::ones((3, 3))));
        assert!(p.transition().values().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn isolated_rows_get_a_self_loop() {
        let w = affinity(array![[0.0, 0.5, 0.0], [0.5, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        let p = diffusion_operator(&w);
        assert_eq!(p.weights().get(2, 2), 0.5);
        assert_eq!(p.transition().get(2, 2), 1.0);
    }

    #[test]
    fn identity_falls_back() {
        let p = diffusion_operator(&AffinityMatrix::identity(5));
        assert_eq!(auto_time(&p).unwrap(), FALLBACK_TIME);
    }

    #[test]
    fn knee_of_a_corner() {
        let curve = [10.0, 5.0, 1.0, 0.9, 0.8, 0.7, 0.6];
        assert_eq!(knee(&curve), 2);
    }

    #[test]
    fn powers_stay_stochastic() {
        let w = affinity(array![[1.0, 0.2, 0.0], [0.2, 0.5, 0.3], [0.0, 0.3, 2.0]]);
        let p = diffusion_operator(&w).transition().to_dense();
        for t in [1, 2, 7, 64] {
            let pt = matrix_power(&p, t);
            for s in pt.sum_axis(Axis(1)) {
                assert!((s - 1.0).abs() < 1e-9);
            }
        }
        let cube = p.dot(&p).dot(&p);
        assert!(matrix_power(&p, 3).iter().zip(cube.iter()).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn identical_rows_have_zero_potential_distance() {
        let pt = array![[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]];
        let d = potential_distances(&pt, 1e-7, None);
        assert_eq!(d[[0, 1]], 0.0);
        assert!(d[[0, 2]] > 1.0);
        assert_eq!(d, d.t());
    }
}
