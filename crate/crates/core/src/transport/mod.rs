//! Bijective optimal transport between semantic profiles.

mod exact;
mod hiref;

pub use exact::{exact_assignment, exact_semantic, Assignment, DEFAULT_EXACT_CAP};
pub use hiref::{co_partition, hiref, Block, HiRefParams};

use crate::coupling::Coupling;
use crate::semantic::SemanticCost;
use crate::sparse::CsrMatrix;

/// The permutation matrix of a coupling.
pub fn coupling_to_matrix(t: &Coupling) -> CsrMatrix {
    t.to_matrix()
}

/// `sum_i cost(i, forward[i])`, accumulated in source order.
pub fn coupling_cost(cost: &SemanticCost, t: &Coupling) -> f64 {
    t.forward()
        .iter()
        .enumerate()
        .map(|(i, &j)| cost.cost(i, j))
        .sum()
}
