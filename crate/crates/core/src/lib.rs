//! Gaussian sequential rate-distortion (SRD) toolkit.
//!
//! Computes SRD functions for multi-dimensional (time-varying or stationary)
//! Gauss-Markov processes under weighted mean-square distortion constraints,
//! and synthesizes the optimal linear-Gaussian sensor together with the
//! matching Kalman filter.
//!
//! The pipeline:
//!
//! 1. [`problems`] translates a [`model::GaussMarkovModel`] plus a
//!    [`model::DistortionSpec`] into a weighted determinant-maximization
//!    problem over block-diagonal PSD variables with linear equality
//!    constraints.
//! 2. [`maxdet`] solves that problem with a primal-dual path-following
//!    interior-point method (Nesterov-Todd scaling, extended normalized
//!    duality gap, banded Newton systems for time-chained instances).
//! 3. [`synthesis`] recovers the per-step matrix SNR, a minimal-dimension
//!    sensor factorization `y_t = C_t x_t + v_t`, the Kalman covariance
//!    recursions and the per-step information rates.
//! 4. [`sim`] validates a synthesized design by Monte Carlo simulation.
//! 5. [`oracles`] holds independent closed forms and brute-force references
//!    used to cross-check the whole chain.
//!
//! The `srdkit` binary (see [`cli`]) exposes the pipeline as subcommands
//! emitting CSV/JSON.

pub mod cli;
pub mod error;
pub mod linalg;
pub mod maxdet;
pub mod model;
pub mod modelfile;
pub mod oracles;
pub mod presets;
pub mod problems;
pub mod sim;
pub mod synthesis;

pub use error::Error;

/// Conversion factor: rate in nats times this is rate in bits.
pub const NATS_TO_BITS: f64 = std::f64::consts::LOG2_E;

/// Schema identifier stamped on every JSON document this crate emits.
pub const SCHEMA_VERSION: &str = "srdkit/1";
