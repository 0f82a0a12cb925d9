//! Spatial mixture models for point-referenced time series whose mean
//! behaviour is driven by a hidden, spatially correlated land-use field.
//!
//! The crate is organised around the estimation pipeline:
//!
//! * [`dataset`] ingests sites, observations and areal land-use compositions
//!   and regularises each site onto a weekly grid.
//! * [`lattice`] builds the Voronoi neighbourhood that carries all spatial
//!   dependence.
//! * [`seasonal`] decomposes every site with STL and aggregates the pieces
//!   into per-land-use temporal basis functions.
//! * [`potts`] implements the hidden Potts prior: sufficient statistic,
//!   brute-force partition function, Swendsen–Wang and the exchange update.
//! * [`nem`] is the Neighborhood EM estimator, [`hbayes`] the Gibbs sampler,
//!   [`baseline`] the lumped CLR regression and the comparison table.
//! * [`simgen`] generates synthetic catchments with known ground truth.

pub mod baseline;
pub mod dataset;
pub mod fit;
pub mod hbayes;
pub mod kmeans;
pub mod lattice;
pub mod linalg;
pub mod nem;
pub mod potts;
pub mod prep;
pub mod rng;
pub mod seasonal;
pub mod simgen;

pub use dataset::{Dataset, LandUseComposition, Observation, Site};
pub use fit::{FitResult, Method};
pub use lattice::Adjacency;
pub use potts::{LabelField, PottsParams};
pub use prep::MixtureData;
