//! Word-level acoustic speaker scores from frame posteriors: median
//! smoothing, pooling over each word's frames, and normalization.

use crate::diarization::FramePosteriorMatrix;
use crate::error::{CoreError, Result};
use crate::transcript::{SpeakerId, WordRecord};

/// Median window used by the extraction pipeline unless overridden.
pub const DEFAULT_MEDIAN_FRAMES: usize = 11;

/// Pooled mass below this is treated as silence and mapped to a uniform vector.
pub const LOW_CONFIDENCE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct SpeakerScoreVector {
    pub scores: Vec<f64>,
    /// Set when the pooled mass was too small to normalize meaningfully.
    pub low_confidence: bool,
}

impl SpeakerScoreVector {
    pub fn argmax(&self) -> usize {
        argmax(&self.scores)
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            scores: vec![1.0 / n as f64; n],
            low_confidence: true,
        }
    }
}

/// First index of the maximum.
pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

/// Centered running median with replicate padding at both ends.
pub fn median_filter(column: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(CoreError::EvenWindow(window));
    }
    let n = column.len();
    let half = window / 2;
    let mut buf = Vec::with_capacity(window);
    Ok((0..n)
        .map(|t| {
            buf.clear();
            for k in 0..window {
                let idx = (t + k).saturating_sub(half).min(n - 1);
                buf.push(column[idx]);
            }
            buf.sort_by(f64::total_cmp);
            buf[half]
        })
        .collect())
}

/// Smooths each speaker column independently.
pub fn median_smooth(posteriors: &FramePosteriorMatrix, window_frames: usize) -> Result<FramePosteriorMatrix> {
    let columns = (0..posteriors.num_speakers())
        .map(|s| median_filter(&posteriors.column(s), window_frames))
        .collect::<Result<Vec<_>>>()?;
    FramePosteriorMatrix::from_columns(&columns, posteriors.frame_duration())
}

/// Mean posterior of each speaker over the word's frames `[start, end)`.
pub fn pool_word_posteriors(smoothed: &FramePosteriorMatrix, word: &WordRecord) -> Result<Vec<f64>> {
    if word.start_frame >= word.end_frame {
        return Err(CoreError::EmptySpan {
            start: word.start_frame,
            end: word.end_frame,
        });
    }
    if word.end_frame > smoothed.num_frames() {
        return Err(CoreError::SpanBeyondMatrix {
            word: word.text.clone(),
            start: word.start_frame,
            end: word.end_frame,
            frames: smoothed.num_frames(),
        });
    }
    let mut sums = vec![0.0; smoothed.num_speakers()];
    for t in word.start_frame..word.end_frame {
        for (s, v) in sums.iter_mut().zip(smoothed.row(t)) {
            *s += v;
        }
    }
    let n = (word.end_frame - word.start_frame) as f64;
    Ok(sums.into_iter().map(|v| v / n).collect())
}

fn normalize_with_floor(raw: &[f64]) -> Result<SpeakerScoreVector> {
    if raw.is_empty() {
        return Err(CoreError::Empty("raw scores"));
    }
    if let Some(&v) = raw.iter().find(|v| v.is_nan() || **v < 0.0) {
        return Err(CoreError::NegativeScore(v));
    }
    let total: f64 = raw.iter().sum();
    if total < LOW_CONFIDENCE_FLOOR {
        return Ok(SpeakerScoreVector::uniform(raw.len()));
    }
    Ok(SpeakerScoreVector {
        scores: raw.iter().map(|v| v / total).collect(),
        low_confidence: false,
    })
}

/// Divides by the total so scores sum to one; near-silent words fall back to
/// the uniform vector flagged `low_confidence`.
pub fn normalize_scores(raw: &[f64]) -> Result<SpeakerScoreVector> {
    normalize_with_floor(raw)
}

/// Keeps the two window speakers' components, in the given order, and
/// renormalizes them.
pub fn restrict_to_window_speakers(
    scores: &SpeakerScoreVector,
    window_speakers: (SpeakerId, SpeakerId),
) -> Result<SpeakerScoreVector> {
    let (a, b) = window_speakers;
    if a == b {
        return Err(CoreError::IdenticalSpeakers(a.index()));
    }
    let n = scores.scores.len();
    for s in [a, b] {
        if s.index() >= n {
            return Err(CoreError::OutOfRange(format!("speaker {s} with {n} score entries")));
        }
    }
    let mut out = normalize_with_floor(&[scores.scores[a.index()], scores.scores[b.index()]])?;
    out.low_confidence |= scores.low_confidence;
    Ok(out)
}

/// Smooths once, then pools and normalizes every word.
pub fn extract_word_scores(
    posteriors: &FramePosteriorMatrix,
    words: &[WordRecord],
    median_frames: usize,
) -> Result<Vec<SpeakerScoreVector>> {
    let smoothed = median_smooth(posteriors, median_frames)?;
    words
        .iter()
        .map(|w| normalize_scores(&pool_word_posteriors(&smoothed, w)?))
        .collect()
}
