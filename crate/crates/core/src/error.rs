use thiserror::Error;

/// Errors produced by the identification toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid block partition: {0}")]
    InvalidPartition(String),

    #[error("block index ({row}, {col}) out of range for a {rows}x{cols} block grid")]
    BlockIndex {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("shape mismatch in {context}: expected {expected:?}, found {found:?}")]
    Shape {
        context: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("covariance `{name}` is not positive semidefinite (smallest eigenvalue {min_eig:e})")]
    NotPsd { name: &'static str, min_eig: f64 },

    #[error("horizon T = {0} is too short, at least 2 steps are required")]
    Horizon(usize),

    #[error("invalid generator parameters: {0}")]
    Generator(String),

    #[error("least-squares estimate undefined: {0}")]
    LsUndefined(String),

    #[error("primal-dual witness undefined: {0}")]
    WitnessUndefined(String),

    #[error("mutual incoherence undefined: {0}")]
    IncoherenceUndefined(String),

    #[error("minimum block magnitude undefined: parameter has no nonzero block")]
    TminUndefined,

    #[error("normalized error undefined: reference parameter is zero")]
    ZeroReference,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid experiment configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
