use thiserror::Error;

pub type Result<T> = std::result::Result<T, MqatError>;

#[derive(Debug, Error)]
pub enum MqatError {
    #[error("{op}: shape mismatch ({detail})")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "infeasible budget {budget}x: smallest assignment needs {min_size_bits} bits, limit is {limit_bits:.0} bits"
    )]
    Infeasible {
        budget: f64,
        min_size_bits: u64,
        limit_bits: f64,
    },

    #[error("training diverged in stage `{stage}` at epoch {epoch}")]
    Divergence { stage: String, epoch: usize },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MqatError {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        MqatError::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        MqatError::InvalidArgument(msg.into())
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        MqatError::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
