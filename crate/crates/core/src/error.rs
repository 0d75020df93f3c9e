use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Total available capacity cannot cover the request.
    #[error("RESOURCE_SHORTAGE: requested {requested} nodes, only {available} available")]
    ResourceShortage { requested: usize, available: usize },

    #[error("infeasible allocation: {requested} nodes over capacity {available}")]
    Infeasible { requested: usize, available: usize },

    /// An enumeration would exceed its size guard.
    #[error("{what}: size {size} exceeds limit {limit}; use Monte-Carlo estimation or smaller parameters")]
    Capacity {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("undefined input: {0}")]
    UndefinedInput(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
