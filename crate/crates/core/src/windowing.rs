//! Sliding-window correction over a reconciled transcript.

use std::ops::Range;

use crate::corrector::{Corrector, TrainingWindow, WindowInput};
use crate::error::{CoreError, Result};
use crate::scores::{restrict_to_window_speakers, SpeakerScoreVector};
use crate::transcript::{LabeledTranscript, SpeakerId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowParams {
    pub window_size: usize,
    pub stride: usize,
}

impl Default for WindowParams {
    fn default() -> Self {
        Self {
            window_size: 30,
            stride: 15,
        }
    }
}

impl WindowParams {
    pub fn validate(&self) -> Result<()> {
        if self.window_size < 2 || self.stride == 0 || self.stride > self.window_size {
            return Err(CoreError::InvalidConfig(format!(
                "window size {} / stride {}: need size >= 2 and 1 <= stride <= size",
                self.window_size, self.stride
            )));
        }
        Ok(())
    }
}

/// Spans `[k*stride, k*stride + size)` that fit, plus one right-aligned span
/// for any uncovered tail. Inputs shorter than a window get a single clipped
/// span.
pub fn make_windows(num_words: usize, window_size: usize, stride: usize) -> Result<Vec<Range<usize>>> {
    WindowParams { window_size, stride }.validate()?;
    if num_words == 0 {
        return Err(CoreError::Empty("transcript"));
    }
    if num_words <= window_size {
        return Ok(vec![0..num_words]);
    }
    let mut spans = Vec::new();
    let mut start = 0;
    while start + window_size <= num_words {
        spans.push(start..start + window_size);
        start += stride;
    }
    if spans.last().is_some_and(|s| s.end < num_words) {
        spans.push(num_words - window_size..num_words);
    }
    Ok(spans)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorrectionWindow {
    pub span: Range<usize>,
    /// Distinct baseline speakers in order of first appearance.
    pub local_speakers: Vec<SpeakerId>,
    pub eligible: bool,
}

impl CorrectionWindow {
    /// The ordered pair when the window has exactly two speakers.
    pub fn pair(&self) -> Option<(SpeakerId, SpeakerId)> {
        match self.local_speakers[..] {
            [a, b] => Some((a, b)),
            _ => None,
        }
    }
}

pub fn classify_window(baseline: &[SpeakerId], span: Range<usize>) -> CorrectionWindow {
    let mut local: Vec<SpeakerId> = Vec::new();
    for &s in &baseline[span.clone()] {
        if !local.contains(&s) {
            local.push(s);
        }
    }
    let eligible = local.len() <= 2;
    CorrectionWindow {
        span,
        local_speakers: local,
        eligible,
    }
}

/// Which window decided a word.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Window(usize),
    Bypassed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectedTranscript {
    pub transcript: LabeledTranscript,
    pub provenance: Vec<Provenance>,
}

/// Global labels proposed by one eligible window for its span.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowPrediction {
    pub span: Range<usize>,
    pub labels: Vec<SpeakerId>,
}

/// Each word takes the label from the covering window whose center is
/// nearest its index; ties go to the window that starts earlier, then to the
/// shorter one. The result depends only on the spans, not on their order.
/// Words no window covers come back as `None`.
pub fn merge_predictions(num_words: usize, predictions: &[WindowPrediction]) -> Vec<Option<(usize, SpeakerId)>> {
    // (prediction index, doubled distance, start, end)
    let mut best: Vec<Option<(usize, usize, usize, usize)>> = vec![None; num_words];
    for (k, p) in predictions.iter().enumerate() {
        // Doubled coordinates keep half-integer centers exact.
        let center2 = (p.span.start + p.span.end - 1) as i64;
        for i in p.span.clone().filter(|&i| i < num_words) {
            let d = (2 * i as i64 - center2).unsigned_abs() as usize;
            let key = (d, p.span.start, p.span.end);
            if best[i].is_none_or(|(_, bd, bs, be)| key < (bd, bs, be)) {
                best[i] = Some((k, d, p.span.start, p.span.end));
            }
        }
    }
    best.iter()
        .enumerate()
        .map(|(i, b)| b.map(|(k, ..)| (k, predictions[k].labels[i - predictions[k].span.start])))
        .collect()
}

fn window_input(
    baseline: &LabeledTranscript,
    scores: &[SpeakerScoreVector],
    span: Range<usize>,
    pair: (SpeakerId, SpeakerId),
) -> Result<WindowInput> {
    let words = &baseline.words[span.clone()];
    Ok(WindowInput {
        words: words.iter().map(|w| w.text.clone()).collect(),
        baseline: words.iter().map(|w| usize::from(w.speaker != pair.0)).collect(),
        scores: scores[span]
            .iter()
            .map(|s| restrict_to_window_speakers(s, pair).map(|r| [r.scores[0], r.scores[1]]))
            .collect::<Result<_>>()?,
    })
}

fn check_lengths(baseline: &LabeledTranscript, scores: &[SpeakerScoreVector]) -> Result<()> {
    if baseline.len() != scores.len() {
        return Err(CoreError::LengthMismatch(format!(
            "{} words but {} score vectors",
            baseline.len(),
            scores.len()
        )));
    }
    Ok(())
}

/// Runs `corrector` on every two-speaker window and merges the results.
/// One-speaker windows vote for the baseline labels; windows with three or
/// more speakers are skipped, and words no eligible window covers keep
/// their baseline label with provenance [`Provenance::Bypassed`].
pub fn correct_transcript(
    baseline: &LabeledTranscript,
    scores: &[SpeakerScoreVector],
    corrector: &dyn Corrector,
    params: WindowParams,
) -> Result<CorrectedTranscript> {
    check_lengths(baseline, scores)?;
    let speakers = baseline.speakers();
    let mut predictions = Vec::new();
    let mut window_ids = Vec::new();
    for (k, span) in make_windows(baseline.len(), params.window_size, params.stride)?
        .into_iter()
        .enumerate()
    {
        let window = classify_window(&speakers, span.clone());
        if !window.eligible {
            continue;
        }
        let labels = match window.pair() {
            Some(pair) => {
                let input = window_input(baseline, scores, span.clone(), pair)?;
                let posteriors = corrector.correct_window(&input)?;
                if posteriors.len() != input.words.len() {
                    return Err(CoreError::LengthMismatch(format!(
                        "corrector returned {} rows for {} words",
                        posteriors.len(),
                        input.words.len()
                    )));
                }
                posteriors
                    .argmax()
                    .into_iter()
                    .map(|l| if l == 0 { pair.0 } else { pair.1 })
                    .collect()
            }
            None => speakers[span.clone()].to_vec(),
        };
        predictions.push(WindowPrediction { span, labels });
        window_ids.push(k);
    }
    let merged = merge_predictions(baseline.len(), &predictions);
    let mut out = baseline.clone();
    let mut provenance = Vec::with_capacity(baseline.len());
    for (word, m) in out.words.iter_mut().zip(merged) {
        match m {
            Some((p, label)) => {
                word.speaker = label;
                provenance.push(Provenance::Window(window_ids[p]));
            }
            None => provenance.push(Provenance::Bypassed),
        }
    }
    Ok(CorrectedTranscript {
        transcript: out,
        provenance,
    })
}

/// Training windows: every two-speaker window of the baseline, with targets
/// from the reference. Words whose true speaker is outside the window's pair
/// get no target.
pub fn training_windows(
    reference: &LabeledTranscript,
    baseline: &LabeledTranscript,
    scores: &[SpeakerScoreVector],
    params: WindowParams,
) -> Result<Vec<TrainingWindow>> {
    check_lengths(baseline, scores)?;
    if !reference.same_words(baseline) {
        return Err(CoreError::WordSequenceDiffers);
    }
    let speakers = baseline.speakers();
    let mut out = Vec::new();
    for span in make_windows(baseline.len(), params.window_size, params.stride)? {
        let Some(pair) = classify_window(&speakers, span.clone()).pair() else {
            continue;
        };
        let input = window_input(baseline, scores, span.clone(), pair)?;
        let targets = reference.words[span]
            .iter()
            .map(|w| match w.speaker {
                s if s == pair.0 => Some(0),
                s if s == pair.1 => Some(1),
                _ => None,
            })
            .collect();
        out.push(TrainingWindow { input, targets });
    }
    Ok(out)
}
