use thiserror::Error;

/// Errors produced by tensor construction, linear algebra, estimation and
/// distribution code.
#[derive(Debug, Clone, PartialEq, Error)]
#[non_exhaustive]
pub enum Error {
    /// A shape with no dimensions or a zero-length dimension.
    #[error("invalid shape {dims:?}: {reason}")]
    InvalidShape { dims: Vec<usize>, reason: &'static str },

    /// Two operands whose shapes were required to agree do not.
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    /// Data length does not match the number of cells implied by the shape.
    #[error("data length {found} does not match shape (expected {expected})")]
    DataLength { expected: usize, found: usize },

    /// NaN or infinite entry at the given linear position.
    #[error("non-finite entry at linear index {index}")]
    NonFinite { index: usize },

    /// Matricization is singular or too badly conditioned to invert.
    #[error("matrix is singular or ill-conditioned (reciprocal condition {rcond:e})")]
    Singular { rcond: f64 },

    /// Matricization is not symmetric within tolerance.
    #[error("matrix is not symmetric (max asymmetry {max_asymmetry:e}, tolerance {tolerance:e})")]
    NotSymmetric { max_asymmetry: f64, tolerance: f64 },

    /// Cholesky hit a non-positive pivot.
    #[error("matrix is not positive definite (pivot {pivot} = {value:e}){hint}")]
    NotPositiveDefinite {
        pivot: usize,
        value: f64,
        hint: &'static str,
    },

    /// A cell of a sample set has zero sample variance.
    #[error("degenerate (zero) variance at cell {index:?}")]
    DegenerateVariance { index: Vec<usize> },

    /// Kernel identifier could not be parsed.
    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),

    /// Kernel has no registered radial sampler.
    #[error("kernel `{0}` has no radial sampler")]
    UnsupportedKernel(String),

    /// Generic argument error (sample counts, parameter ranges).
    #[error("{0}")]
    Argument(String),
}

impl Error {
    /// True for failures of a mathematical precondition (singular, asymmetric,
    /// indefinite, degenerate variance) as opposed to malformed input.
    pub fn is_math_precondition(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::NotSymmetric { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::DegenerateVariance { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
