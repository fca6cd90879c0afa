//! Frame-level diarization output, the permutation-free training loss, and a
//! frame DER scorer.

use crate::error::{CoreError, Result};

/// Largest speaker count for which permutations are enumerated.
pub const MAX_ENUMERATED_SPEAKERS: usize = 8;

/// Posteriors are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const LOG_CLAMP_EPS: f64 = 1e-7;

/// `T × S` per-frame speaker activity probabilities. Rows need not sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct FramePosteriorMatrix {
    values: Vec<f64>,
    num_frames: usize,
    num_speakers: usize,
    frame_duration: f64,
}

impl FramePosteriorMatrix {
    pub fn new(num_frames: usize, num_speakers: usize, values: Vec<f64>, frame_duration: f64) -> Result<Self> {
        if num_frames == 0 || num_speakers == 0 {
            return Err(CoreError::Shape(format!(
                "posterior matrix must be non-empty, got {num_frames}x{num_speakers}"
            )));
        }
        if values.len() != num_frames * num_speakers {
            return Err(CoreError::Shape(format!(
                "{} values for a {num_frames}x{num_speakers} matrix",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(CoreError::OutOfRange(format!("posterior {v} outside [0, 1]")));
        }
        if !(frame_duration.is_finite() && frame_duration > 0.0) {
            return Err(CoreError::OutOfRange(format!("frame duration {frame_duration}")));
        }
        Ok(Self {
            values,
            num_frames,
            num_speakers,
            frame_duration,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], frame_duration: f64) -> Result<Self> {
        let s = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != s) {
            return Err(CoreError::Shape("ragged posterior rows".into()));
        }
        Self::new(rows.len(), s, rows.concat(), frame_duration)
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_speakers(&self) -> usize {
        self.num_speakers
    }

    pub fn frame_duration(&self) -> f64 {
        self.frame_duration
    }

    pub fn frame_rate(&self) -> f64 {
        1.0 / self.frame_duration
    }

    pub fn get(&self, frame: usize, speaker: usize) -> f64 {
        self.values[frame * self.num_speakers + speaker]
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.values[frame * self.num_speakers..(frame + 1) * self.num_speakers]
    }

    pub fn column(&self, speaker: usize) -> Vec<f64> {
        (0..self.num_frames).map(|t| self.get(t, speaker)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Thresholds at 0.5 (inclusive) into binary activity.
    pub fn binarize(&self) -> SpeakerActivityLabels {
        SpeakerActivityLabels {
            values: self.values.iter().map(|&p| p >= 0.5).collect(),
            num_frames: self.num_frames,
            num_speakers: self.num_speakers,
        }
    }

    pub(crate) fn from_columns(columns: &[Vec<f64>], frame_duration: f64) -> Result<Self> {
        let s = columns.len();
        let t = columns.first().map_or(0, Vec::len);
        let mut values = vec![0.0; t * s];
        for (j, col) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                values[i * s + j] = *v;
            }
        }
        Self::new(t, s, values, frame_duration)
    }
}

/// `T × S` binary speaker activity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpeakerActivityLabels {
    values: Vec<bool>,
    num_frames: usize,
    num_speakers: usize,
}

impl SpeakerActivityLabels {
    pub fn new(num_frames: usize, num_speakers: usize, values: Vec<bool>) -> Result<Self> {
        if num_frames == 0 || num_speakers == 0 || values.len() != num_frames * num_speakers {
            return Err(CoreError::Shape(format!(
                "{} labels for a {num_frames}x{num_speakers} matrix",
                values.len()
            )));
        }
        Ok(Self {
            values,
            num_frames,
            num_speakers,
        })
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let s = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != s) {
            return Err(CoreError::Shape("ragged label rows".into()));
        }
        Self::new(rows.len(), s, rows.iter().flatten().map(|&v| v != 0).collect())
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_speakers(&self) -> usize {
        self.num_speakers
    }

    pub fn get(&self, frame: usize, speaker: usize) -> bool {
        self.values[frame * self.num_speakers + speaker]
    }

    pub fn set(&mut self, frame: usize, speaker: usize, active: bool) {
        self.values[frame * self.num_speakers + speaker] = active;
    }

    pub fn active_count(&self) -> usize {
        self.values.iter().filter(|&&v| v).count()
    }

    /// Returns a copy with columns reordered: output column `s` is input
    /// column `order[s]`.
    pub fn permute_columns(&self, order: &[usize]) -> Self {
        let mut out = self.clone();
        for t in 0..self.num_frames {
            for (s, &src) in order.iter().enumerate() {
                out.set(t, s, self.get(t, src));
            }
        }
        out
    }
}

/// Advances `perm` to the next lexicographic permutation. Returns false after
/// the last one.
pub fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Calls `f` on every permutation of `0..n` in lexicographic order.
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        f(&perm);
        if !next_permutation(&mut perm) {
            break;
        }
    }
}

pub fn binary_cross_entropy(label: bool, p: f64) -> f64 {
    let p = p.clamp(LOG_CLAMP_EPS, 1.0 - LOG_CLAMP_EPS);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PermutationFreeLoss {
    pub loss: f64,
    /// `permutation[s]` is the label column matched to posterior column `s`.
    pub permutation: Vec<usize>,
}

/// Minimum over label-column permutations of the mean binary cross-entropy
/// `(1 / (T·S)) Σ_t BCE(y_t^φ, p_t)`. Ties resolve to the lexicographically
/// first permutation.
pub fn permutation_free_loss(
    labels: &SpeakerActivityLabels,
    posteriors: &FramePosteriorMatrix,
) -> Result<PermutationFreeLoss> {
    let (t, s) = (posteriors.num_frames(), posteriors.num_speakers());
    if labels.num_frames() != t || labels.num_speakers() != s {
        return Err(CoreError::Shape(format!(
            "labels {}x{} vs posteriors {t}x{s}",
            labels.num_frames(),
            labels.num_speakers()
        )));
    }
    if s > MAX_ENUMERATED_SPEAKERS {
        return Err(CoreError::TooManySpeakers(s));
    }
    // cost[out][src]: BCE of posterior column `out` against label column `src`.
    let mut cost = vec![vec![0.0; s]; s];
    for (out, row) in cost.iter_mut().enumerate() {
        for (src, c) in row.iter_mut().enumerate() {
            *c = (0..t)
                .map(|f| binary_cross_entropy(labels.get(f, src), posteriors.get(f, out)))
                .sum();
        }
    }
    let norm = (t * s) as f64;
    let mut best = PermutationFreeLoss {
        loss: f64::INFINITY,
        permutation: Vec::new(),
    };
    for_each_permutation(s, |perm| {
        let total: f64 = perm.iter().enumerate().map(|(out, &src)| cost[out][src]).sum();
        let loss = total / norm;
        if loss < best.loss {
            best = PermutationFreeLoss {
                loss,
                permutation: perm.to_vec(),
            };
        }
    });
    Ok(best)
}

/// Frame-level diarization error rate: (miss + false alarm + confusion) over
/// total reference speaker-frames, under the best hypothesis→reference
/// speaker mapping.
pub fn frame_der(reference: &SpeakerActivityLabels, hypothesis: &SpeakerActivityLabels) -> Result<f64> {
    let t = reference.num_frames();
    if hypothesis.num_frames() != t {
        return Err(CoreError::Shape(format!(
            "reference has {t} frames, hypothesis {}",
            hypothesis.num_frames()
        )));
    }
    let (sr, sh) = (reference.num_speakers(), hypothesis.num_speakers());
    let n = sr.max(sh);
    if n > MAX_ENUMERATED_SPEAKERS {
        return Err(CoreError::TooManySpeakers(n));
    }
    let total_ref = reference.active_count();
    if total_ref == 0 {
        return Err(CoreError::NoReferenceSpeech);
    }
    let mut overlap = vec![vec![0usize; sr]; sh];
    let mut worst_case = 0usize;
    for f in 0..t {
        let nr = (0..sr).filter(|&r| reference.get(f, r)).count();
        let nh = (0..sh).filter(|&h| hypothesis.get(f, h)).count();
        worst_case += nr.max(nh);
        for (h, row) in overlap.iter_mut().enumerate() {
            if hypothesis.get(f, h) {
                for (r, o) in row.iter_mut().enumerate() {
                    if reference.get(f, r) {
                        *o += 1;
                    }
                }
            }
        }
    }
    let mut best_correct = 0usize;
    for_each_permutation(n, |perm| {
        let correct: usize = (0..sh)
            .filter(|&h| perm[h] < sr)
            .map(|h| overlap[h][perm[h]])
            .sum();
        best_correct = best_correct.max(correct);
    });
    Ok((worst_case - best_correct) as f64 / total_ref as f64)
}
