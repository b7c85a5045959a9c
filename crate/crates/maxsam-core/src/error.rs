//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("self-loop at node {node}")]
    SelfLoop { node: usize },

    #[error("asymmetric entry at ({i},{j}) in undirected input: {w_ij} vs {w_ji}")]
    Asymmetric { i: usize, j: usize, w_ij: u64, w_ji: u64 },

    #[error("constraint violation: {0}")]
    Constraint(String),

    #[error("graph/model mismatch: {0}")]
    Incompatible(String),

    #[error("parameter domain violation: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("enumeration size over cap: {0}")]
    OverCap(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
