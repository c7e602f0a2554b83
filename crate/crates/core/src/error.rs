use thiserror::Error;

use crate::mdp::{Mode, Violation};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {}", join(.0))]
    InvalidInstance(Vec<Violation>),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("expected {expected} mode, instance is {found}")]
    ModeMismatch { expected: Mode, found: Mode },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid LP: {0}")]
    InvalidLp(String),

    #[error("simplex exceeded {0} iterations")]
    IterationLimit(usize),

    #[error("basis matrix became singular during refactorization")]
    SingularBasis,

    #[error("utility weight {weight} at eta = {eta} is negative")]
    NegativeWeight { eta: f64, weight: f64 },

    #[error("policy induces a multichain process with recurrent classes {classes:?}")]
    Multichain { classes: Vec<Vec<usize>> },

    #[error("{count} deterministic policies exceed the enumeration limit {limit}")]
    TooManyPolicies { count: f64, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("portfolio configuration: {0}")]
    Portfolio(String),

    #[error("no sampled constraints")]
    EmptySample,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
