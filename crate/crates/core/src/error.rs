use thiserror::Error;

use crate::network::ValidationReport;
use crate::numeric::Backend;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid network: {0}")]
    Invalid(ValidationReport),

    #[error("network parameters are {network}, cannot solve with the {requested} backend")]
    BackendMismatch { network: Backend, requested: Backend },

    #[error("instantiation does not assign variable {0}")]
    PartialInstantiation(String),

    #[error("state {state} out of range for variable {var} (cardinality {card})")]
    StateOutOfRange { var: String, state: usize, card: usize },

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),

    #[error("zero-probability evidence")]
    ZeroProbabilityEvidence,

    #[error("evidence has zero probability under all MAP assignments")]
    AllAssignmentsZero,

    #[error("candidate mismatch: {0}")]
    CandidateMismatch(String),

    #[error("enumeration guard exceeded: {states} states > limit {limit}")]
    GuardExceeded { states: u128, limit: u128 },

    #[error("timed out")]
    Timeout,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
