use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("rank-deficient matrix (condition estimate {condition:.3e})")]
    RankDeficient { condition: f64 },

    #[error("effective-channel entry ({row}, {col}) of user {user} was never measured")]
    EstimationGap { user: usize, row: usize, col: usize },

    #[error("degenerate precoder column {0}")]
    DegeneratePrecoder(usize),

    #[error("logic error: {0}")]
    Logic(String),

    #[error("exhaustive search refused: {0}")]
    OracleRefused(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
