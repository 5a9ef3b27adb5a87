use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("source {source_index} coincides with microphone {mic_index}")]
    CoincidentSource { source_index: usize, mic_index: usize },

    #[error("utterance {utterance} references unknown speaker {speaker}")]
    UnknownSpeaker { utterance: usize, speaker: usize },

    #[error("signal too short: need {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("insufficient coherent segments: {usable} usable, need at least 3")]
    InsufficientSegments { usable: usize },

    #[error("non-finite log-likelihood at frame {frame}, bin {bin}")]
    NonFinite { frame: usize, bin: usize },

    #[error("speaker {0} has no representative TDOA vector")]
    MissingRepresentative(usize),

    #[error("empty segment")]
    EmptySegment,

    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
