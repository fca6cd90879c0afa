//! Acoustically grounded lexical speaker error correction.

pub mod diarization;
pub mod corrector;
pub mod error;
pub mod experiment;
pub mod scores;
pub mod scoring;
pub mod synth;
pub mod tokenizer;
pub mod transcript;
pub mod windowing;

pub use error::{CoreError, Result};
pub use transcript::{LabeledTranscript, LabeledWord, SpeakerId, WordRecord};
