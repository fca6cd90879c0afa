use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Global speaker identity within one conversation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpeakerId(pub usize);

impl SpeakerId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for SpeakerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A recognized word with its frame span `[start_frame, end_frame)` and the
/// speaker assigned by the baseline diarization/recognition reconciliation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordRecord {
    pub text: String,
    pub start_frame: usize,
    pub end_frame: usize,
    pub baseline_speaker: SpeakerId,
}

impl WordRecord {
    pub fn new(text: impl Into<String>, start_frame: usize, end_frame: usize, baseline_speaker: SpeakerId) -> Result<Self> {
        let text = text.into();
        if text.is_empty() {
            return Err(CoreError::Empty("word text"));
        }
        if start_frame >= end_frame {
            return Err(CoreError::EmptySpan {
                start: start_frame,
                end: end_frame,
            });
        }
        Ok(Self {
            text,
            start_frame,
            end_frame,
            baseline_speaker,
        })
    }

    pub fn frame_count(&self) -> usize {
        self.end_frame - self.start_frame
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledWord {
    pub text: String,
    pub speaker: SpeakerId,
}

/// Ordered words with speaker attribution.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabeledTranscript {
    pub words: Vec<LabeledWord>,
}

impl LabeledTranscript {
    pub fn new(words: Vec<LabeledWord>) -> Self {
        Self { words }
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, usize)>) -> Self {
        Self {
            words: pairs
                .into_iter()
                .map(|(t, s)| LabeledWord {
                    text: t.into(),
                    speaker: SpeakerId(s),
                })
                .collect(),
        }
    }

    /// Words split on whitespace, all attributed to `speaker`.
    pub fn single_speaker(text: &str, speaker: usize) -> Self {
        Self::from_pairs(text.split_whitespace().map(|w| (w, speaker)))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.words.iter().map(|w| w.text.as_str()).collect()
    }

    pub fn speakers(&self) -> Vec<SpeakerId> {
        self.words.iter().map(|w| w.speaker).collect()
    }

    pub fn same_words(&self, other: &LabeledTranscript) -> bool {
        self.len() == other.len() && self.words.iter().zip(&other.words).all(|(a, b)| a.text == b.text)
    }

    pub fn with_speakers(&self, speakers: &[SpeakerId]) -> Result<Self> {
        if speakers.len() != self.len() {
            return Err(CoreError::LengthMismatch(format!(
                "{} speakers for {} words",
                speakers.len(),
                self.len()
            )));
        }
        Ok(Self {
            words: self
                .words
                .iter()
                .zip(speakers)
                .map(|(w, &s)| LabeledWord {
                    text: w.text.clone(),
                    speaker: s,
                })
                .collect(),
        })
    }
}

/// A word from one speaker's stream with its start time.
#[derive(Clone, Debug, PartialEq)]
pub struct TimedWord {
    pub start: f64,
    pub speaker: SpeakerId,
    pub text: String,
}

/// Merges per-speaker word streams into one sequence ordered by start time,
/// ties broken by speaker id. The sort is stable so each speaker keeps its
/// own word order.
pub fn serialize_streams(words: Vec<TimedWord>) -> LabeledTranscript {
    let order = serialization_order(&words);
    let mut slots: Vec<Option<TimedWord>> = words.into_iter().map(Some).collect();
    LabeledTranscript {
        words: order
            .into_iter()
            .map(|i| {
                let w = slots[i].take().expect("order is a permutation");
                LabeledWord {
                    text: w.text,
                    speaker: w.speaker,
                }
            })
            .collect(),
    }
}

/// Indices of `words` in serialized order (start time, then speaker id;
/// stable otherwise).
pub fn serialization_order(words: &[TimedWord]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..words.len()).collect();
    order.sort_by(|&a, &b| {
        let (a, b) = (&words[a], &words[b]);
        a.start.total_cmp(&b.start).then(a.speaker.cmp(&b.speaker))
    });
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_record_invariants() {
        assert!(WordRecord::new("hi", 3, 3, SpeakerId(0)).is_err());
        assert!(WordRecord::new("", 0, 1, SpeakerId(0)).is_err());
        assert_eq!(WordRecord::new("hi", 2, 5, SpeakerId(1)).unwrap().frame_count(), 3);
    }

    #[test]
    fn streams_interleave_by_start() {
        let w = |start, s: usize, t: &str| TimedWord {
            start,
            speaker: SpeakerId(s),
            text: t.into(),
        };
        let merged = serialize_streams(vec![w(0.0, 0, "a"), w(0.6, 0, "b"), w(0.3, 1, "x"), w(0.6, 1, "y")]);
        assert_eq!(merged.texts(), vec!["a", "x", "b", "y"]);
    }
}
