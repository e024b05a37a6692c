use thiserror::Error;

/// Errors raised by parameter validation, simulation, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("value {value} outside domain of size {domain_size}")]
    OutOfDomain { value: usize, domain_size: usize },

    #[error("domain size mismatch: expected {expected}, got {actual}")]
    DomainMismatch { expected: usize, actual: usize },

    #[error("sampling plan covers {plan_len} nodes but dataset has {n}")]
    PlanMismatch { plan_len: usize, n: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("enumeration of {size} outcomes exceeds limit of {limit}")]
    InstanceTooLarge { size: f64, limit: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
