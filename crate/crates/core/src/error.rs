use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("case error: {0}")]
    Case(String),

    #[error("inapplicable: {0}")]
    Inapplicable(String),

    #[error("undecidable: {0}")]
    Undecidable(String),

    #[error("drift solve did not converge after {iterations} iterations (residual {residual:e})")]
    StepConvergence { iterations: usize, residual: f64 },

    #[error("drift substep increased the H-norm: {before:e} -> {after:e}")]
    Dissipativity { before: f64, after: f64 },

    #[error("ensemble error: {0}")]
    Ensemble(String),

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("hash mismatch for {artifact}: expected {expected}, found {found}")]
    HashMismatch {
        artifact: String,
        expected: String,
        found: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlParse(#[from] toml::de::Error),

    #[error(transparent)]
    TomlEmit(#[from] toml::ser::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name: name.to_string(),
        reason: reason.into(),
    }
}
