use thiserror::Error;

use crate::metric::{CenterId, PointId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A document or constructor argument failed validation. `path` names the
    /// offending field, e.g. `distance_matrix[2][0]`.
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },

    #[error("point id {id} out of range (instance has {len} points)")]
    PointOutOfRange { id: usize, len: usize },

    #[error("center id {id} out of range (instance has {len} candidate centers)")]
    CenterOutOfRange { id: usize, len: usize },

    #[error("open center set is empty")]
    EmptyOpenSet,

    #[error("{size} open centers exceed the budget of {budget}")]
    BudgetExceeded { size: usize, budget: usize },

    #[error("invalid swap: {0}")]
    InvalidMove(String),

    #[error("combinatorial budget exceeded: {count} subsets > cap {cap}")]
    CombinatorialBudget { count: u128, cap: u128 },

    #[error("pairing failed: {0}")]
    Pairing(String),

    #[error("invalid search configuration: {0}")]
    Config(String),

    #[error("malformed document at {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn invalid(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn point(id: PointId, len: usize) -> Self {
        Error::PointOutOfRange { id: id.0, len }
    }

    pub(crate) fn center(id: CenterId, len: usize) -> Self {
        Error::CenterOutOfRange { id: id.0, len }
    }
}
