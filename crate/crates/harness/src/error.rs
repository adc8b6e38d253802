use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("{failed} of {total} pulses failed, more than 1 %")]
    TooManyFailures { failed: usize, total: usize },
    #[error(transparent)]
    Core(#[from] solnft::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
