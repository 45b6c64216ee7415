use thiserror::Error;

/// Errors raised by the bound, sample-size, inference and oracle routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A distribution or model parameter violates its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The tail side does not match the threshold position.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The threshold sits on a removable singularity of the closed form.
    #[error("singular threshold: {0}")]
    Singularity(String),

    /// The family has no decomposition or closed form for this operation.
    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),

    /// The Chernoff search could not bracket the minimiser.
    #[error("bracket expansion failed: {0}")]
    Bracket(String),

    /// An exact computation would exceed the enumeration budget.
    #[error("exact computation infeasible: {0}")]
    Capacity(String),
}

pub type Result<T> = std::result::Result<T, Error>;
