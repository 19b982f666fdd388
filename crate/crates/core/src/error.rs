//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A scalar argument is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Parameters fail a validity check (ranges, consistency).
    #[error("invalid parameters: {0}")]
    Params(String),

    /// A curvature argument fell outside the tabulated range.
    #[error("curvature {kappa:.6e} outside tabulated range [{min:.6e}, {max:.6e}]")]
    KappaRange { kappa: f64, min: f64, max: f64 },

    /// A state violated an ordering / admissibility requirement.
    #[error("inadmissible state: {0}")]
    State(String),

    /// An iterative solver failed to converge or lost its bracket.
    #[error("solver failure: {0}")]
    Solver(String),

    /// Geometric construction failed (projection, closure, degeneracy).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// File contents did not match the expected format.
    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
