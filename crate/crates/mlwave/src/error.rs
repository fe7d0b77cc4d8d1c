//! One error type across the IO layer and the CLI, with the exit-code
//! convention: 1 usage, 2 data/format, 3 numerical failure.

use mlwave_core::fitting::FitError;
use mlwave_core::grid::GridError;
use mlwave_core::model::ModelError;
use mlwave_core::optim::OptimError;
use mlwave_core::scan::ScanError;
use mlwave_core::tensor::TensorError;
use mlwave_core::training::TrainError;
use mlwave_core::wavelet::WaveletError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("model file version mismatch: {0}")]
    FormatVersionMismatch(String),
    #[error("model file checksum mismatch")]
    ChecksumMismatch,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<String>, message: impl Into<String>) -> Error {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code: 1 usage, 2 data/format, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Io { .. }
            | Error::Format { .. }
            | Error::FormatVersionMismatch(_)
            | Error::ChecksumMismatch
            | Error::Grid(_)
            | Error::Scan(_)
            | Error::Model(_) => 2,
            Error::Wavelet(_) | Error::Tensor(_) | Error::Train(_) | Error::Fit(_)
            | Error::Optim(_) => 3,
        }
    }
}
