use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::model::VertexId;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("I/O error on {path}: {source}")]
    IoAt { path: PathBuf, source: io::Error },

    /// A record could not be decoded because the input was too short.
    #[error("framing error: need {needed} bytes, got {got}")]
    Framing { needed: usize, got: usize },

    /// A stream ended before the requested number of items was read.
    #[error("stream corruption: {0}")]
    Corruption(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("duplicate vertex id {0}")]
    DuplicateVertex(VertexId),

    #[error("message addressed to unknown vertex {0}")]
    UnknownVertex(VertexId),

    #[error("adjacency list references missing vertex {0}")]
    DanglingNeighbor(VertexId),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("compute failed at vertex {vertex}: {msg}")]
    Compute { vertex: VertexId, msg: String },

    #[error("job aborted: {0}")]
    Aborted(String),
}

impl Error {
    pub(crate) fn at(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Error {
        let path = path.into();
        move |source| Error::IoAt { path, source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
