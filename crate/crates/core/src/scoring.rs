//! Word alignment, WDER and error accounting.

use std::collections::BTreeSet;

use crate::diarization::{for_each_permutation, MAX_ENUMERATED_SPEAKERS};
use crate::error::{CoreError, Result};
use crate::transcript::{LabeledTranscript, SpeakerId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EditKind {
    Correct,
    Substitution,
    Deletion,
    Insertion,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AlignedPair {
    pub reference: Option<usize>,
    pub hypothesis: Option<usize>,
    pub kind: EditKind,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EditCounts {
    pub correct: usize,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

impl EditCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlignmentResult {
    pub pairs: Vec<AlignedPair>,
    pub counts: EditCounts,
}

impl AlignmentResult {
    fn from_pairs(pairs: Vec<AlignedPair>) -> Self {
        let mut counts = EditCounts::default();
        for p in &pairs {
            match p.kind {
                EditKind::Correct => counts.correct += 1,
                EditKind::Substitution => counts.substitutions += 1,
                EditKind::Deletion => counts.deletions += 1,
                EditKind::Insertion => counts.insertions += 1,
            }
        }
        Self { pairs, counts }
    }

    /// (reference index, hypothesis index) of every correct or substituted pair.
    pub fn aligned_positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().filter_map(|p| match (p.reference, p.hypothesis) {
            (Some(r), Some(h)) => Some((r, h)),
            _ => None,
        })
    }
}

/// Levenshtein alignment over word strings (all edits cost 1). Among optimal
/// alignments the backtrace from the end prefers match, then substitution,
/// then deletion, then insertion.
pub fn align_words(reference: &LabeledTranscript, hypothesis: &LabeledTranscript) -> Result<AlignmentResult> {
    align_tokens(&reference.texts(), &hypothesis.texts())
}

pub fn align_tokens<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<AlignmentResult> {
    let (n, m) = (reference.len(), hypothesis.len());
    if n == 0 && m == 0 {
        return Err(CoreError::NothingToAlign);
    }
    let w = m + 1;
    let mut cost = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        cost[i * w] = i;
    }
    for j in 0..=m {
        cost[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = cost[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let del = cost[(i - 1) * w + j] + 1;
            let ins = cost[i * w + j - 1] + 1;
            cost[i * w + j] = diag.min(del).min(ins);
        }
    }

    let mut pairs = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = cost[i * w + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hypothesis[j - 1];
            if cost[(i - 1) * w + j - 1] + usize::from(!same) == here {
                pairs.push(AlignedPair {
                    reference: Some(i - 1),
                    hypothesis: Some(j - 1),
                    kind: if same { EditKind::Correct } else { EditKind::Substitution },
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && cost[(i - 1) * w + j] + 1 == here {
            pairs.push(AlignedPair {
                reference: Some(i - 1),
                hypothesis: None,
                kind: EditKind::Deletion,
            });
            i -= 1;
        } else {
            pairs.push(AlignedPair {
                reference: None,
                hypothesis: Some(j - 1),
                kind: EditKind::Insertion,
            });
            j -= 1;
        }
    }
    pairs.reverse();
    Ok(AlignmentResult::from_pairs(pairs))
}

#[derive(Clone, Debug, PartialEq)]
pub struct WderBreakdown {
    pub wder: f64,
    /// Correct words attributed to the wrong speaker.
    pub c_is: usize,
    /// Substituted words attributed to the wrong speaker.
    pub s_is: usize,
    /// C + S.
    pub denominator: usize,
}

impl WderBreakdown {
    fn new(c_is: usize, s_is: usize, denominator: usize) -> Result<Self> {
        if denominator == 0 {
            return Err(CoreError::NoAlignedWords);
        }
        Ok(Self {
            wder: (c_is + s_is) as f64 / denominator as f64,
            c_is,
            s_is,
            denominator,
        })
    }

    /// Pools counts across conversations.
    pub fn aggregate<'a>(parts: impl IntoIterator<Item = &'a WderBreakdown>) -> Result<Self> {
        let (mut c, mut s, mut d) = (0, 0, 0);
        for p in parts {
            c += p.c_is;
            s += p.s_is;
            d += p.denominator;
        }
        Self::new(c, s, d)
    }
}

/// Hypothesis-to-reference speaker mapping maximizing the number of aligned
/// words whose speakers agree. Hypothesis speakers left without a partner
/// map to `None`. Among maximal mappings the first in permutation order of
/// the sorted ids wins, so equal-id mappings are preferred.
pub fn speaker_mapping(pairs: &[(SpeakerId, SpeakerId)]) -> Result<Vec<(SpeakerId, Option<SpeakerId>)>> {
    let refs: Vec<SpeakerId> = pairs.iter().map(|p| p.0).collect::<BTreeSet<_>>().into_iter().collect();
    let hyps: Vec<SpeakerId> = pairs.iter().map(|p| p.1).collect::<BTreeSet<_>>().into_iter().collect();
    let n = refs.len().max(hyps.len());
    if n > MAX_ENUMERATED_SPEAKERS {
        return Err(CoreError::TooManySpeakers(n));
    }
    // overlap[h][r]
    let mut overlap = vec![vec![0usize; n]; n];
    for (r, h) in pairs {
        let ri = refs.binary_search(r).expect("collected above");
        let hi = hyps.binary_search(h).expect("collected above");
        overlap[hi][ri] += 1;
    }
    let mut best: Option<(usize, Vec<usize>)> = None;
    for_each_permutation(n, |perm| {
        let score: usize = perm.iter().enumerate().map(|(h, &r)| overlap[h][r]).sum();
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, perm.to_vec()));
        }
    });
    let perm = best.map(|b| b.1).unwrap_or_default();
    Ok(hyps
        .iter()
        .enumerate()
        .map(|(h, &id)| (id, refs.get(perm[h]).copied()))
        .collect())
}

fn mapped(mapping: &[(SpeakerId, Option<SpeakerId>)], hyp: SpeakerId) -> Option<SpeakerId> {
    mapping.iter().find(|m| m.0 == hyp).and_then(|m| m.1)
}

/// Per aligned position (C or S), whether the hypothesis speaker, after the
/// best global mapping, disagrees with the reference speaker.
fn speaker_errors(
    alignment: &AlignmentResult,
    ref_speakers: &[SpeakerId],
    hyp_speakers: &[SpeakerId],
) -> Result<Vec<(usize, usize, bool)>> {
    let mut pairs = Vec::new();
    for (r, h) in alignment.aligned_positions() {
        let (Some(&rs), Some(&hs)) = (ref_speakers.get(r), hyp_speakers.get(h)) else {
            return Err(CoreError::LengthMismatch(format!(
                "aligned position ({r}, {h}) lacks a speaker label"
            )));
        };
        pairs.push((rs, hs));
    }
    let mapping = speaker_mapping(&pairs)?;
    Ok(alignment
        .aligned_positions()
        .zip(&pairs)
        .map(|((r, h), &(rs, hs))| (r, h, mapped(&mapping, hs) != Some(rs)))
        .collect())
}

pub fn wder(alignment: &AlignmentResult, ref_speakers: &[SpeakerId], hyp_speakers: &[SpeakerId]) -> Result<WderBreakdown> {
    let errors = speaker_errors(alignment, ref_speakers, hyp_speakers)?;
    let (mut c_is, mut s_is) = (0, 0);
    let kinds = alignment
        .pairs
        .iter()
        .filter(|p| matches!(p.kind, EditKind::Correct | EditKind::Substitution));
    for (p, &(_, _, wrong)) in kinds.zip(&errors) {
        if wrong {
            match p.kind {
                EditKind::Correct => c_is += 1,
                _ => s_is += 1,
            }
        }
    }
    WderBreakdown::new(c_is, s_is, errors.len())
}

/// Aligns and scores in one step.
pub fn wder_transcripts(reference: &LabeledTranscript, hypothesis: &LabeledTranscript) -> Result<WderBreakdown> {
    let alignment = align_words(reference, hypothesis)?;
    wder(&alignment, &reference.speakers(), &hypothesis.speakers())
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorAccounting {
    /// Aligned (C + S) positions considered.
    pub aligned: usize,
    pub baseline_errors: usize,
    pub corrected_errors: usize,
    /// Wrong in the baseline, right after correction.
    pub fixed: usize,
    /// Right in the baseline, wrong after correction.
    pub broken: usize,
    /// fixed / baseline_errors, in percent (0 when the baseline has no errors).
    pub corrected_pct: f64,
    /// broken / baseline_errors, in percent (0 when the baseline has no errors).
    pub introduced_pct: f64,
}

impl ErrorAccounting {
    fn finish(mut self) -> Self {
        let denom = self.baseline_errors as f64;
        if self.baseline_errors > 0 {
            self.corrected_pct = 100.0 * self.fixed as f64 / denom;
            self.introduced_pct = 100.0 * self.broken as f64 / denom;
        } else {
            self.corrected_pct = 0.0;
            self.introduced_pct = 0.0;
        }
        self
    }

    pub fn aggregate<'a>(parts: impl IntoIterator<Item = &'a ErrorAccounting>) -> Self {
        let mut total = ErrorAccounting::default();
        for p in parts {
            total.aligned += p.aligned;
            total.baseline_errors += p.baseline_errors;
            total.corrected_errors += p.corrected_errors;
            total.fixed += p.fixed;
            total.broken += p.broken;
        }
        total.finish()
    }
}

/// Counts speaker errors fixed and introduced by a correction. Baseline and
/// corrected transcripts must carry the same words; each is mapped to the
/// reference speakers independently.
pub fn error_accounting(
    baseline: &LabeledTranscript,
    corrected: &LabeledTranscript,
    reference: &LabeledTranscript,
) -> Result<ErrorAccounting> {
    if !baseline.same_words(corrected) {
        return Err(CoreError::WordSequenceDiffers);
    }
    let alignment = align_words(reference, baseline)?;
    let ref_speakers = reference.speakers();
    let before = speaker_errors(&alignment, &ref_speakers, &baseline.speakers())?;
    let after = speaker_errors(&alignment, &ref_speakers, &corrected.speakers())?;
    let mut acc = ErrorAccounting {
        aligned: before.len(),
        ..Default::default()
    };
    for (b, a) in before.iter().zip(&after) {
        acc.baseline_errors += usize::from(b.2);
        acc.corrected_errors += usize::from(a.2);
        acc.fixed += usize::from(b.2 && !a.2);
        acc.broken += usize::from(!b.2 && a.2);
    }
    Ok(acc.finish())
}
