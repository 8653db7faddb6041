//! PHATE-style embedding of a joint affinity graph: diffusion, potential
//! distances, classical MDS and stress refinement, with landmarking for large
//! graphs.

pub mod diffusion;
pub mod eigen;
pub mod io;
pub mod landmark;
pub mod mds;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use diffusion::{auto_time, diffusion_operator, DiffusionOperator};
pub use io::{read_embedding_csv, write_embedding_csv, EmbeddedSample};

use crate::error::{Error, Result};
use crate::rng::{streams, RngConfig};
use crate::sparse::AffinityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TimeRepr", into = "TimeRepr")]
pub enum DiffusionTime {
    Auto,
    Steps(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TimeRepr {
    Steps(usize),
    Name(String),
}

impl TryFrom<TimeRepr> for DiffusionTime {
    type Error = String;

    fn try_from(r: TimeRepr) -> std::result::Result<Self, String> {
        match r {
            TimeRepr::Steps(t) => Ok(DiffusionTime::Steps(t)),
            TimeRepr::Name(s) if s == "auto" => Ok(DiffusionTime::Auto),
            TimeRepr::Name(s) => Err(format!("diffusion time must be a positive integer or \"auto\", got \"{s}\"")),
        }
    }
}

impl From<DiffusionTime> for TimeRepr {
    fn from(t: DiffusionTime) -> Self {
        match t {
            DiffusionTime::Auto => TimeRepr::Name("auto".into()),
            DiffusionTime::Steps(s) => TimeRepr::Steps(s),
        }
    }
}

impl std::str::FromStr for DiffusionTime {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(DiffusionTime::Auto);
        }
        s.parse::<usize>()
            .map(DiffusionTime::Steps)
            .map_err(|_| format!("diffusion time must be a positive integer or \"auto\", got \"{s}\""))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedParams {
    pub out_dims: usize,
    pub t: DiffusionTime,
    pub landmarks: usize,
    pub mds_iters: usize,
    pub eps: f64,
}

impl Default for EmbedParams {
    fn default() -> Self {
        Self {
            out_dims: 2,
            t: DiffusionTime::Auto,
            landmarks: 2000,
            mds_iters: 100,
            eps: 1e-7,
        }
    }
}

impl EmbedParams {
    pub fn validate(&self) -> Result<()> {
        if self.out_dims == 0 {
            return Err(Error::param("out_dims must be positive"));
        }
        if self.landmarks < self.out_dims + 1 {
            return Err(Error::param("landmarks must exceed out_dims"));
        }
        if self.t == DiffusionTime::Steps(0) {
            return Err(Error::param("diffusion time must be at least 1"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::param("eps must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Embedding {
    pub coords: Array2<f64>,
    /// Diffusion time actually used.
    pub t: usize,
    pub landmark_mode: bool,
    /// Set when the potential geometry was degenerate and zeros were returned.
    pub degenerate: bool,
}

/// Embeds the graph; landmark mode kicks in when it has more nodes than
/// `params.landmarks`.
pub fn landmark_embed(w: &AffinityMatrix, params: &EmbedParams, rng: &RngConfig) -> Result<Embedding> {
    params.validate()?;
    let n = w.size();
    let mut stream = rng.stream(streams::EMBED);
    if n <= 1 {
        return Ok(Embedding {
            coords: Array2::zeros((n, params.out_dims)),
            t: 1,
            landmark_mode: false,
            degenerate: false,
        });
    }
    let op = diffusion_operator(w);
    if n <= params.landmarks {
        return exact(&op, params, None, &mut stream);
    }
    let lm = landmark::build(&op, params.landmarks, &mut stream);
    // one landmark step spans two steps of the full operator
    let mut inner_params = params.clone();
    if let DiffusionTime::Steps(t) = params.t {
        inner_params.t = DiffusionTime::Steps(t.div_ceil(2));
    }
    let inner = exact(&diffusion_operator(&lm.affinity), &inner_params, Some(&lm.sizes), &mut stream)?;
    Ok(Embedding {
        coords: landmark::place(&lm, &inner.coords),
        t: inner.t,
        landmark_mode: true,
        degenerate: inner.degenerate,
    })
}

/// `weights` scale each coordinate of the potential rows; a landmark stands in
/// for as many coordinates as it has members.
fn exact(
    op: &DiffusionOperator,
    params: &EmbedParams,
    weights: Option<&[f64]>,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Embedding> {
    let n = op.len();
    let t = match params.t {
        DiffusionTime::Steps(t) => t,
        DiffusionTime::Auto => auto_time(op)?,
    };
    let pt = diffusion::matrix_power(&op.transition().to_dense(), t);
    if pt.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("diffusion powers became non-finite".into()));
    }
    let dist = diffusion::potential_distances(&pt, params.eps, weights);
    let dims = params.out_dims;
    let coords = match mds::classical_mds(&dist, dims.min(n), rng) {
        Some(init) => {
            let mut init_full = Array2::zeros((n, dims));
            init_full.slice_mut(ndarray::s![.., ..init.ncols()]).assign(&init);
            Some(mds::smacof(&dist, init_full, params.mds_iters, weights))
        }
        None => None,
    };
    let degenerate = coords.is_none();
    if degenerate {
        log::warn!("all potential distances vanish; returning zero coordinates");
    }
    Ok(Embedding {
        coords: coords.unwrap_or_else(|| Array2::zeros((n, dims))),
        t,
        landmark_mode: false,
        degenerate,
    })
}
