//! Error type shared by all modules.

/// Errors produced by matrix construction, samplers, the forward model and
/// the spectral statistics.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Dimension mismatch between operands, or an operation that requires a
    /// particular shape (square, T <= d, ...).
    #[error("shape error: {0}")]
    Shape(String),

    /// Input contains NaN/Inf or is otherwise outside the operation's domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A scalar argument is outside its allowed range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A documented precondition does not hold (e.g. rows of a would-be
    /// Markov matrix do not sum to 1).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The requested computation is not defined for this configuration
    /// (e.g. closed-form gradients with skip connections enabled).
    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    /// Overflow/underflow or a solver failure during the computation.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The operation is undefined for this value (e.g. stable rank of the
    /// zero matrix).
    #[error("undefined input: {0}")]
    UndefinedInput(String),

    /// Exact integer arithmetic would leave its supported range.
    #[error("out of range: {0}")]
    Range(String),

    /// Filesystem failure while writing experiment outputs.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
