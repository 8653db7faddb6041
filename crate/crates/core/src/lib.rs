//! Semi-supervised manifold alignment with random-forest proximities and
//! label-aware optimal transport.

pub mod align;
pub mod bench;
pub mod coupling;
pub mod domain;
pub mod embed;
pub mod error;
pub mod forest;
pub mod fusion;
pub mod kmeans;
pub mod metrics;
pub mod proximity;
pub mod rng;
pub mod semantic;
pub mod sparse;
pub mod transport;

pub use coupling::Coupling;
pub use domain::LabeledDomain;
pub use embed::{EmbedParams, Embedding};
pub use error::{Error, Result};
pub use forest::{Forest, ForestParams};
pub use rng::RngConfig;
pub use semantic::SemanticProfile;
pub use sparse::{AffinityMatrix, CsrMatrix};
pub use transport::HiRefParams;
