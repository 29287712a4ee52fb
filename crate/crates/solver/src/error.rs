use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("backend `{backend}` does not support {what}")]
    Unsupported { backend: String, what: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
}
