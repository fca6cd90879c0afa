use aglsec_nn::NnError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("too many speakers for brute-force enumeration: {0} > {max}", max = crate::diarization::MAX_ENUMERATED_SPEAKERS)]
    TooManySpeakers(usize),
    #[error("no reference speech")]
    NoReferenceSpeech,
    #[error("median window must be odd and positive, got {0}")]
    EvenWindow(usize),
    #[error("empty word span [{start}, {end})")]
    EmptySpan { start: usize, end: usize },
    #[error("word `{word}` spans frames [{start}, {end}) beyond {frames} frames")]
    SpanBeyondMatrix {
        word: String,
        start: usize,
        end: usize,
        frames: usize,
    },
    #[error("negative score {0}")]
    NegativeScore(f64),
    #[error("window speakers must be distinct, got {0} twice")]
    IdenticalSpeakers(usize),
    #[error("window has {0} distinct speakers; at most 2 are supported")]
    TooManyWindowSpeakers(usize),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("nothing to align: reference and hypothesis are both empty")]
    NothingToAlign,
    #[error("no aligned words (C + S = 0)")]
    NoAlignedWords,
    #[error("baseline and corrected transcripts have different words")]
    WordSequenceDiffers,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("bad model checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Nn(#[from] NnError),
}
