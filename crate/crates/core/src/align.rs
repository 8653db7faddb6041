//! End-to-end alignment of two partially labeled domains: per-domain forests
//! and proximities, semantic profiles, a bijective coupling and the fused
//! joint graph.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::coupling::Coupling;
use crate::domain::LabeledDomain;
use crate::error::{Error, Result};
use crate::forest::{Forest, ForestParams};
use crate::fusion::{fuse, propagate};
use crate::proximity::assemble_intra;
use crate::rng::{streams, RngConfig};
use crate::semantic::{normalize, profiles, SemanticCost, SemanticProfile};
use crate::sparse::{AffinityMatrix, CsrMatrix};
use crate::transport::{coupling_cost, exact_semantic, hiref, HiRefParams, DEFAULT_EXACT_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    #[default]
    Hierarchical,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignParams {
    pub forest: ForestParams,
    pub hiref: HiRefParams,
    pub solver: Solver,
    pub exact_cap: usize,
    /// Train both forests from one random stream instead of one per domain.
    pub shared_forest_seed: bool,
}

impl Default for AlignParams {
    fn default() -> Self {
        Self {
            forest: ForestParams::default(),
            hiref: HiRefParams::default(),
            solver: Solver::default(),
            exact_cap: DEFAULT_EXACT_CAP,
            shared_forest_seed: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Alignment {
    pub w_a: AffinityMatrix,
    pub w_b: AffinityMatrix,
    pub profile_a: SemanticProfile,
    pub profile_b: SemanticProfile,
    pub coupling: Coupling,
    /// Total semantic cost of the coupling.
    pub transport_cost: f64,
    pub w_ab: CsrMatrix,
    pub joint: AffinityMatrix,
    pub timings: Vec<StageTiming>,
}

/// Random stream salts for the two forests.
const FOREST_A: u64 = 1;
const FOREST_B: u64 = 2;

pub fn align(a: &LabeledDomain, b: &LabeledDomain, params: &AlignParams, rng: &RngConfig) -> Result<Alignment> {
    params.forest.validate()?;
    params.hiref.validate()?;
    if a.len() != b.len() {
        return Err(Error::dims(format!(
            "domains have {} and {} samples; a bijective coupling needs equal sizes (subsample the larger domain)",
            a.len(),
            b.len()
        )));
    }
    if a.class_names() != b.class_names() {
        return Err(Error::data("domains must share the same class list"));
    }
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |stage: &'static str, timings: &mut Vec<StageTiming>| {
        let seconds = clock.elapsed().as_secs_f64();
        log::info!("{stage}: {seconds:.3}s");
        timings.push(StageTiming { stage, seconds });
        clock = Instant::now();
    };

    let forest_rng = |salt: u64| {
        if params.shared_forest_seed {
            rng.derive(streams::FOREST)
        } else {
            rng.derive(salt)
        }
    };
    let (fa, fb) = rayon::join(
        || Forest::train(a, &params.forest, &forest_rng(FOREST_A)),
        || Forest::train(b, &params.forest, &forest_rng(FOREST_B)),
    );
    let (fa, fb) = (fa?, fb?);
    lap("forest", &mut timings);

    let (w_a, w_b) = rayon::join(|| assemble_intra(&fa, a), || assemble_intra(&fb, b));
    let (w_a, w_b) = (w_a?, w_b?);
    lap("proximity", &mut timings);

    let profile_a = normalize(&profiles(&w_a, a)?);
    let profile_b = normalize(&profiles(&w_b, b)?);
    for (name, p) in [("source", &profile_a), ("target", &profile_b)] {
        if p.zero_rows() > 0 {
            log::warn!("{name} domain has {} samples with no affinity to any labeled sample", p.zero_rows());
        }
    }
    lap("semantic", &mut timings);

    let cost = SemanticCost::new(&profile_a, &profile_b)?;
    let coupling = match params.solver {
        Solver::Exact => exact_semantic(&cost, params.exact_cap)?.coupling,
        Solver::Hierarchical => hiref(&profile_a, &profile_b, &params.hiref, rng)?,
    };
    let transport_cost = coupling_cost(&cost, &coupling);
    lap("transport", &mut timings);

    let w_ab = propagate(&w_a, &w_b, &coupling)?;
    let joint = fuse(&w_a, &w_b, &w_ab)?;
    lap("fusion", &mut timings);

    Ok(Alignment {
        w_a,
        w_b,
        profile_a,
        profile_b,
        coupling,
        transport_cost,
        w_ab,
        joint,
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{blobs, BlobParams};
    use crate::domain::mask_labels;

    fn pair(n: usize) -> (LabeledDomain, LabeledDomain) {
        let p = BlobParams { n, dims: 4, classes: 3, ..Default::default() };
        let a = blobs(&p, &RngConfig::new(1)).unwrap();
        let b = mask_labels(&blobs(&p, &RngConfig::new(2)).unwrap(), 0.5, &RngConfig::new(3)).unwrap();
        (a, b)
    }

    #[test]
    fn joint_graph_has_both_domains() {
        let (a, b) = pair(90);
        let params = AlignParams { forest: ForestParams { n_trees: 20, ..Default::default() }, ..Default::default() };
        let out = align(&a, &b, &params, &RngConfig::new(0)).unwrap();
        assert_eq!(out.joint.size(), 180);
        assert_eq!(out.coupling.len(), 90);
        let stages: Vec<_> = out.timings.iter().map(|t| t.stage).collect();
        assert_eq!(stages, ["forest", "proximity", "semantic", "transport", "fusion"]);
    }

    #[test]
    fn exact_solver_never_costs_more() {
        let (a, b) = pair(120);
        let mut params = AlignParams { forest: ForestParams { n_trees: 20, ..Default::default() }, ..Default::default() };
        let h = align(&a, &b, &params, &RngConfig::new(0)).unwrap();
        params.solver = Solver::Exact;
        let e = align(&a, &b, &params, &RngConfig::new(0)).unwrap();
        assert!(e.transport_cost <= h.transport_cost + 1e-9);
    }

    #[test]
    fn size_mismatch_is_reported() {
        let (a, b) = pair(30);
        let b = b.subset(&(0..27).collect::<Vec<_>>()).unwrap();
        assert!(matches!(
            align(&a, &b, &AlignParams::default(), &RngConfig::new(0)),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
