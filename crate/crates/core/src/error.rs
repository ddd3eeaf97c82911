//! Crate-wide error type.

/// Errors surfaced by parsing, synthesis, and simulation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("xml parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("schema error: missing mandatory section `{0}`")]
    MissingSection(&'static str),

    #[error("value error at line {line}: attribute `{attr}`: {msg}")]
    Value {
        line: usize,
        attr: String,
        msg: String,
    },

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("trace error at line {line}: {msg}")]
    Trace { line: usize, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("plan error: {0}")]
    Plan(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, Error>;
