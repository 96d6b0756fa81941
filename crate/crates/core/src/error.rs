use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A geometric or mathematical precondition does not hold (coincident points, wrong depth, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("layout contains no metal at tile size {tile_nm} nm")]
    EmptyTiling { tile_nm: f64 },

    #[error("{count} tiles exceed the limit of {limit}; increase the tile size")]
    TooManyTiles { count: usize, limit: usize },

    #[error(
        "{solver} did not converge after {iterations} iterations (best residual {residual:.3e})"
    )]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("`{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }
}
