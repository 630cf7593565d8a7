//! Numerical laboratory for non-stationary Anderson models on the cubic
//! lattice: finite-volume Hamiltonians and resolvents, quantile Bernoulli
//! decompositions, Sperner-type probability bounds, the Lifshitz initial-scale
//! estimate, Wegner-style event machinery, and multiscale schedule arithmetic.
//!
//! Everything operates at desk scale: cubes small enough to diagonalize or
//! solve directly, with exact combinatorics where the ground set permits it.

pub mod combinatorics;
pub mod ensembles;
pub mod error;
pub mod initial_scale;
pub mod lattice;
pub mod msa;
pub mod operators;
pub mod rng;
pub mod wegner;

pub use error::CoreError;
pub use lattice::{ConeSpec, Cube, Site};
