use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument violates the operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Point dimensions (or matrix shapes) do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The operation is not available for these inputs (unbounded domain,
    /// missing cost derivatives, unsupported kernel smoothness...).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Problem size exceeds what a desk-scale oracle accepts.
    #[error("size limit exceeded: {size} > {limit}")]
    SizeLimit { size: usize, limit: usize },

    /// A transport plan puts mass where the product of its marginals has none,
    /// or has negative entries.
    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    /// A certified inequality failed numerically.
    #[error("bound violation: {0}")]
    BoundViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
