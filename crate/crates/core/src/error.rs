use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Tensor dimensions do not satisfy an operator's contract.
    #[error("{op}: {msg}")]
    Shape { op: &'static str, msg: String },

    /// A NaN or infinity showed up where only finite values are allowed.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Misuse of the autodiff tape (unknown variable, bad seed gradient, ...).
    #[error("tape: {0}")]
    Tape(String),

    #[error("invalid config: {0}")]
    Config(String),

    /// Malformed `.rten` tensor file or checkpoint container.
    #[error("format: {0}")]
    Format(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("synthesis: {0}")]
    Synth(String),

    #[error("image {path}: {msg}")]
    Image { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err<T>(op: &'static str, msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape {
        op,
        msg: msg.into(),
    })
}
