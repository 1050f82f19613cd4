use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    /// The input lies outside the domain of a quantifier (e.g. no joint
    /// distribution reproduces the given tripartite correlators).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    /// Training diverged; `history` holds `(train, validation)` loss per epoch.
    #[error("training error: {msg} (after {} epochs)", history.len())]
    Training { msg: String, history: Vec<(f64, f64)> },

    /// A file or dataset does not have the layout its consumer expects.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
