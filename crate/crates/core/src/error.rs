use thiserror::Error;

use crate::tree::ValidationReport;

pub type Result<T, E = CegError> = std::result::Result<T, E>;

/// Errors raised by the engine. Tree invariant violations are reported as
/// data by [`crate::tree::ProbabilityTree::validate`]; they only become an
/// error when an operation needs a valid tree.
#[derive(Debug, Error)]
pub enum CegError {
    #[error("invalid tree: {0}")]
    InvalidTree(ValidationReport),

    #[error("malformed graph: {0}")]
    MalformedGraph(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("edge {edge} does not leave position {position}")]
    EdgeNotAtPosition { edge: String, position: String },

    #[error("observation has zero probability; conditioning is undefined")]
    ZeroProbabilityObservation,

    #[error("instance too large: {paths} paths exceed the cap of {cap}")]
    InstanceTooLarge { paths: u128, cap: u128 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown id: {0}")]
    UnknownId(String),

    #[error("format error: {0}")]
    Format(String),
}
