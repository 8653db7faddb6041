//! Shortest-augmenting-path Hungarian algorithm with potentials, O(n^3).

use crate::coupling::Coupling;
use crate::error::{Error, Result};
use crate::semantic::SemanticCost;

pub const DEFAULT_EXACT_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub coupling: Coupling,
    pub objective: f64,
}

/// Minimum-cost perfect matching for the `n x n` cost `cost(i, j)`.
///
/// Among equal-cost columns the lowest index is taken, so a constant cost
/// yields the identity.
pub fn exact_assignment(n: usize, cost: impl Fn(usize, usize) -> f64, cap: usize) -> Result<Assignment> {
    if n > cap {
        return Err(Error::param(format!(
            "exact assignment capped at {cap} samples, got {n}; use the hierarchical solver"
        )));
    }
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let v = cost(i, j);
            if !v.is_finite() {
                return Err(Error::Numerical(format!("non-finite cost at ({i}, {j})")));
            }
            c[i * n + j] = v;
        }
    }
    let forward = hungarian(n, &c);
    let objective = forward.iter().enumerate().map(|(i, &j)| c[i * n + j]).sum();
    Ok(Assignment {
        coupling: Coupling::new(forward)?,
        objective,
    })
}

pub fn exact_semantic(cost: &SemanticCost, cap: usize) -> Result<Assignment> {
    let n = cost.src().len();
    if cost.dst().len() != n {
        return Err(Error::dims(format!(
            "bijective transport needs equal sizes, got {n} and {}",
            cost.dst().len()
        )));
    }
    exact_assignment(n, |i, j| cost.cost(i, j), cap)
}

/// Rows and columns are 1-based inside; slot 0 is the virtual start column.
fn hungarian(n: usize, c: &[f64]) -> Vec<usize> {
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let row = &c[(i0 - 1) * n..i0 * n];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut forward = vec![0; n];
    for j in 1..=n {
        forward[owner[j] - 1] = j - 1;
    }
    forward
}
