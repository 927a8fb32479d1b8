//! Symbol-count statistics for rational stochastic models.
//!
//! A model is a weighted finite automaton `(ξ, μ, η)` whose total weight
//! matrix `M = A_1 + … + A_ℓ + B` is primitive. Words of length `n` are drawn
//! with probability proportional to their weight, and `Y_n ∈ ℕ^ℓ` counts the
//! occurrences of the symbols `a_1, …, a_ℓ`. The crate provides:
//!
//! - [`model`]: ingestion, validation and DFA conversion;
//! - [`spectral`]: the Perron eigenvalue surface `y(t)` of `M(t)`;
//! - [`exact`]: exact finite-`n` distributions, moments and tails;
//! - [`sampler`]: exact random generation of words;
//! - [`asymptotics`]: mean/covariance constants and convergence diagnostics;
//! - [`deviations`]: large and moderate deviation rate functions.
//!
//! Every asymptotic quantity can be cross-checked against the exact
//! transfer-matrix computation.

pub mod asymptotics;
pub mod cli;
pub mod deviations;
pub mod error;
pub mod exact;
pub mod fixtures;
pub mod model;
pub mod report;
pub mod sampler;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{LinearRepresentation, PrimitiveModel};
