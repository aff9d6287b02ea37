use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("channel plan must contain at least one channel")]
    EmptyPlan,

    #[error("invalid channel plan: {0}")]
    InvalidPlan(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("QBER undefined: sifted rate is zero")]
    UndefinedQber,

    #[error("frame sync failed: {0}")]
    Sync(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("insufficient data: sifted key has {have} bits, need at least {need}")]
    InsufficientData { have: usize, need: usize },

    #[error("requested {requested} output bits from a {available}-bit key")]
    OutputTooLong { requested: usize, available: usize },

    #[error("target BER {0:e} not reachable within the [-60, +10] dBm bracket")]
    Unreachable(f64),

    #[error("calibration anchor unreachable: {0}")]
    AnchorUnreachable(String),

    #[error("transcript parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("scenario ({context}): {source}")]
    Scenario {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
