use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("readout mitigation unreliable on qubit {qubit}: attenuation {lambda:.4} below 0.1")]
    MitigationUnreliable { qubit: usize, lambda: f64 },

    #[error("out-of-fold scores required for meta-learner training (in-sample scores refused)")]
    Leakage,

    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_stage(self, stage: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}
