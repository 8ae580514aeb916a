//! File formats, XML extraction and the `proofmatch` command-line
//! interface for the statement-proof matching pipeline.
//!
//! The algorithms live in `proofmatch-core`; this crate adds everything
//! that touches the filesystem: the JSONL corpus format, split files,
//! binary model checkpoints, XML document extraction, the synthetic-corpus
//! generator and the CLI subcommands.

pub mod cli;
pub mod io;
pub mod report;
pub mod stats;
pub mod synth;
pub mod xml;

use std::path::PathBuf;

/// Crate-wide error, tagged with the process exit code the CLI maps it to:
/// 1 for usage errors, 2 for data errors, 3 for numerical divergence.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {detail}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("{0}")]
    Data(String),

    #[error("training diverged (non-finite gradients)")]
    Diverged,
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Io { .. } | Error::MalformedLine { .. } | Error::Data(_) => 2,
            Error::Diverged => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}

impl From<proofmatch_core::corpus::CorpusError> for Error {
    fn from(e: proofmatch_core::corpus::CorpusError) -> Self {
        Error::Data(e.to_string())
    }
}

impl From<proofmatch_core::training::TrainError> for Error {
    fn from(e: proofmatch_core::training::TrainError) -> Self {
        match e {
            proofmatch_core::training::TrainError::Diverged => Error::Diverged,
            other => Error::Data(other.to_string()),
        }
    }
}

impl From<proofmatch_core::encoder::EncodeError> for Error {
    fn from(e: proofmatch_core::encoder::EncodeError) -> Self {
        Error::Data(e.to_string())
    }
}

impl From<proofmatch_core::eval::EvalError> for Error {
    fn from(e: proofmatch_core::eval::EvalError) -> Self {
        Error::Data(e.to_string())
    }
}
