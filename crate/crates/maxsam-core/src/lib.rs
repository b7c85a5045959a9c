//! Maximum-entropy null models for binary and weighted networks.
//!
//! The crate fits seven canonical ensembles by likelihood maximization
//! (UBCM, DBCM, RBCM, UWCM, DWCM, RWCM, UECM), samples graphs from the
//! fitted ensembles with exact per-pair laws, and analyzes constraints,
//! higher-order statistics and fluctuations. Canonical samples can be
//! distilled into uniform microcanonical ones by exact-constraint
//! filtering.
//!
//! Pipeline: observed constraints -> [`solver::solve`] -> hidden
//! variables -> [`sampler::sample_ensemble`] -> reports in [`analysis`]
//! and [`micro`]. The `maxsam` binary wires the same pipeline over
//! files.

pub mod analysis;
pub mod cli;
pub mod constraints;
pub mod ensemble;
pub mod error;
pub mod graph;
pub mod io;
pub mod micro;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod solver;

pub use constraints::ConstraintSet;
pub use ensemble::{HiddenVariables, PairDistribution};
pub use error::{Error, Result};
pub use graph::{Graph, PairDecomposition};
pub use model::Model;
