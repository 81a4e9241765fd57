use thiserror::Error;

use crate::network::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network:\n{0}")]
    InvalidNetwork(ValidationReport),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown builtin network `{0}`")]
    UnknownBuiltin(String),

    #[error("unknown edge `{0}`")]
    UnknownEdge(String),

    #[error("cannot parse pattern `{input}`: {reason}")]
    Pattern { input: String, reason: String },

    /// The payoff system induced by a support has no unique solution.
    #[error("indeterminate support: equations for edges [{}] are linearly dependent", .dependent.join(", "))]
    IndeterminateSupport { dependent: Vec<String> },

    #[error("no interior mixed equilibrium: {0}")]
    NoInteriorMixed(String),

    #[error("enumeration budget exceeded: network has {edges} edges, limit is {limit}")]
    Budget { edges: usize, limit: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed network file: {0}")]
    Json(#[from] serde_json::Error),
}
