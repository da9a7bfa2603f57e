//! CLI error type; every failure renders as one machine-readable JSON object
//! on stderr.

use semalign::codec::CodecError;
use semalign::encoder::EncoderError;
use semalign::loss::LossError;
use semalign::optim::OptimError;
use semalign::report::{ReportError, VocabularyError};
use semalign::retrieval::RetrievalError;
use semalign::schedule::ScheduleError;
use semalign::similarity::SimilarityError;
use semalign::synth::SynthError;
use semalign::trainer::{CheckpointError, TrainError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config key {key:?}: {message}")]
    Config { key: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("{0}")]
    CheckFailed(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Vocabulary(#[from] VocabularyError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => "ConfigError",
            CliError::Io { .. } => "IoError",
            CliError::Format { .. } => "FormatError",
            CliError::CheckFailed(_) => "CheckFailed",
            CliError::Codec(CodecError::ParseFailure(_)) => "ParseFailure",
            CliError::Codec(_) => "CodecError",
            CliError::Encoder(_) => "EncoderError",
            CliError::Loss(_) => "LossError",
            CliError::Optim(_) => "OptimError",
            CliError::Report(_) => "ReportError",
            CliError::Vocabulary(_) => "VocabularyError",
            CliError::Retrieval(_) => "RetrievalError",
            CliError::Schedule(_) => "ScheduleError",
            CliError::Similarity(_) => "SimilarityError",
            CliError::Synth(_) => "SynthError",
            CliError::Train(_) => "TrainError",
            CliError::Checkpoint(_) => "CheckpointError",
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> CliError {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn format(path: &std::path::Path, message: impl std::fmt::Display) -> CliError {
        CliError::Format {
            path: path.display().to_string(),
            message: message.to_string(),
        }
    }
}
