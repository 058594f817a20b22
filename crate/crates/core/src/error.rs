//! Error type shared by the pricing library.

use thiserror::Error;

/// Errors surfaced by construction, evaluation, and solver routines.
///
/// Hot-path coefficient evaluations (volatility, hazard, PDE coefficients)
/// treat out-of-range arguments as programming errors and panic instead;
/// everything that depends on user input or runtime state reports through
/// this type.
#[derive(Debug, Error)]
pub enum Error {
    /// A model or configuration value violates a documented invariant.
    /// The message names the violated invariant.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A point (financial or computational coordinates) falls outside the
    /// closed computational rectangle.
    #[error("out of domain: {0}")]
    OutOfDomain(String),

    /// Mesh sizing or array-length mismatch.
    #[error("size error: {0}")]
    Size(String),

    /// A required coupon/grid date is missing from a result map.
    #[error("missing date: no value stored for t = {0}")]
    MissingDate(f64),

    /// The linear solver failed (singular/indefinite factorization or
    /// non-convergent iteration) while advancing the given time step.
    #[error("linear solver failure at time step {step}: {reason}")]
    SolverFailure { step: usize, reason: String },

    /// The Fichera sign test changed sign across the sampled points of a
    /// single face, so the face cannot be classified as a whole.
    #[error("inconclusive Fichera classification on face {face}: sign changes across sampled points (min {min:e}, max {max:e})")]
    InconclusiveFichera {
        face: &'static str,
        min: f64,
        max: f64,
    },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
