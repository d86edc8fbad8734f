use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A run or component was configured inconsistently.
    #[error("configuration error: {0}")]
    Config(String),

    /// Several configuration problems reported together.
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    ConfigList(Vec<String>),

    /// Ancilla-0 mass fell below the acceptance floor.
    #[error("degenerate post-selection: acceptance {acceptance:e} below floor {floor:e}")]
    DegeneratePostSelection { acceptance: f64, floor: f64 },

    /// A backward pass was requested on a tape that holds no forward pass.
    #[error("backward called without a recorded forward pass ({0})")]
    MissingTape(&'static str),

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("IDX parse error in {path} at byte {offset}: {message}")]
    Idx {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("non-finite value during training: {0}")]
    NonFinite(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
