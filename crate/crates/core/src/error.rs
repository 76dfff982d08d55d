//! Error taxonomy shared by every computation in the crate.
//!
//! All fallible operations return [`Result`]. Diagnostic payloads are kept as
//! `f64` regardless of the scalar type the computation ran in, so the error
//! type stays non-generic and cheap to match on.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building states or evaluating
/// information matrices.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A source configuration with zero sources was supplied.
    #[error("source configuration is empty")]
    EmptyConfig,

    /// Positions and weights differ in length.
    #[error("got {positions} positions but {weights} weights")]
    LengthMismatch { positions: usize, weights: usize },

    /// A weight was zero or negative.
    #[error("weight {value} at index {index} is not strictly positive")]
    NonpositiveWeight { index: usize, value: f64 },

    /// A point-spread-function width was zero or negative.
    #[error("point-spread-function width {value} is not strictly positive")]
    NonpositiveWidth { value: f64 },

    /// A position, weight or model parameter was NaN or infinite.
    #[error("input contains a non-finite value")]
    NonFiniteInput,

    /// Two sources are too close for the closed-form route, which inverts
    /// their Gram matrix.
    #[error("sources {i} and {j} coincide (separation {separation:e})")]
    CoincidentSources { i: usize, j: usize, separation: f64 },

    /// The Gram matrix of the coherent envelopes is numerically singular.
    #[error("Gram matrix condition number {condition:e} exceeds the trusted limit")]
    ConditioningFailure { condition: f64 },

    /// The requested mode cutoff discards too much of a source envelope.
    #[error("basis truncation discards norm {defect:e} of source {source_index}")]
    TruncationInsufficient { source_index: usize, defect: f64 },

    /// Repeated dimension doubling failed to stabilise the matrix.
    #[error("no convergence after {doublings} dimension doublings (last relative change {last_change:e})")]
    ConvergenceFailure { doublings: u32, last_change: f64 },

    /// The two-level reduced state is too close to pure for its closed form.
    #[error("two-level reduced state is degenerate (denominator {denom:e})")]
    DegenerateQubitState { denom: f64 },

    /// Doubling the quadrature grid still changes the result too much.
    #[error("quadrature did not settle (relative change {max_change:e} after doubling the grid)")]
    QuadratureNonConvergence { max_change: f64 },

    /// An eigenvalue inside the fit window underflowed; its slope is
    /// meaningless.
    #[error("eigenvalue {index} underflowed inside the fit window")]
    DegenerateFit { index: usize },

    /// Too few sweep points fall inside the fit window.
    #[error("scaling fit needs at least {needed} points in the window, got {got}")]
    InsufficientSweep { needed: usize, got: usize },

    /// The requested parameter transformation is not invertible.
    #[error("reparameterisation matrix is singular")]
    SingularTransform,

    /// A detection model was configured with unusable parameters.
    #[error("invalid detection model: {reason}")]
    InvalidDetection { reason: String },
}
