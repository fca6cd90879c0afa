//! Synthetic conversations with reference speakers, noisy frame posteriors
//! and a baseline transcript carrying injected speaker errors.

pub mod templates;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use self::templates::{phrase, Family};
use crate::diarization::{FramePosteriorMatrix, SpeakerActivityLabels};
use crate::error::{CoreError, Result};
use crate::scores::{extract_word_scores, SpeakerScoreVector};
use crate::transcript::{serialization_order, LabeledTranscript, LabeledWord, SpeakerId, TimedWord, WordRecord};
use crate::windowing::{classify_window, make_windows, training_windows, CorrectionWindow, WindowParams};
use crate::corrector::TrainingWindow;

/// Words within this many positions of a turn change form its boundary zone.
pub const BOUNDARY_ZONE: usize = 2;
const LEAD_FRAMES: usize = 2;
const TAIL_FRAMES: usize = 2;

// Dialogue shape.
const QUESTION_PROBABILITY: f64 = 0.45;
const SELF_ANSWER_PROBABILITY: f64 = 0.1;
const BACKCHANNEL_PROBABILITY: f64 = 0.2;
const OPENER_PROBABILITY: f64 = 0.4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorConfig {
    pub seed: u64,
    pub num_speakers: usize,
    pub num_turns: usize,
    /// Inclusive word-count range for regular turns. Backchannel turns are
    /// shorter.
    pub words_per_turn: [usize; 2],
    pub overlap_probability: f64,
    /// Standard deviation of the logit-domain noise.
    pub posterior_noise: f64,
    /// Frame-to-frame correlation of the logit noise (AR(1) coefficient).
    pub noise_correlation: f64,
    /// Clean logit magnitude for active / inactive frames.
    pub logit_margin: f64,
    /// Range, as a fraction of `logit_margin`, of the wrong-speaker lean on
    /// words whose baseline label was flipped.
    pub error_confidence: [f64; 2],
    /// Correct words near turn changes or in overlap get a margin drawn
    /// uniformly from this fraction up to 1.
    pub boundary_confidence: f64,
    pub error_rate_at_boundaries: f64,
    pub error_rate_interior: f64,
    pub frame_rate: f64,
    /// Seconds per word.
    pub word_duration: f64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_speakers: 2,
            num_turns: 6,
            words_per_turn: [3, 8],
            overlap_probability: 0.15,
            posterior_noise: 1.0,
            noise_correlation: 0.9,
            logit_margin: 3.0,
            error_confidence: [0.1, 0.5],
            boundary_confidence: 0.3,
            error_rate_at_boundaries: 0.25,
            error_rate_interior: 0.02,
            frame_rate: 10.0,
            word_duration: 0.3,
        }
    }
}

impl SimulatorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CoreError::InvalidConfig(msg));
        if !(2..=4).contains(&self.num_speakers) {
            return bad(format!("num_speakers {} outside 2..=4", self.num_speakers));
        }
        if self.num_turns == 0 {
            return bad("num_turns must be positive".into());
        }
        let [lo, hi] = self.words_per_turn;
        if lo == 0 || lo > hi {
            return bad(format!("words_per_turn [{lo}, {hi}] is empty or includes 0"));
        }
        for (name, p) in [
            ("overlap_probability", self.overlap_probability),
            ("error_rate_at_boundaries", self.error_rate_at_boundaries),
            ("error_rate_interior", self.error_rate_interior),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} {p} outside [0, 1]"));
            }
        }
        if !(self.posterior_noise >= 0.0 && self.posterior_noise.is_finite()) {
            return bad(format!("posterior_noise {}", self.posterior_noise));
        }
        if !(0.0..1.0).contains(&self.noise_correlation) {
            return bad(format!("noise_correlation {} outside [0, 1)", self.noise_correlation));
        }
        if !(self.logit_margin > 0.0 && self.logit_margin.is_finite()) {
            return bad(format!("logit_margin {}", self.logit_margin));
        }
        let [elo, ehi] = self.error_confidence;
        if !(0.0 <= elo && elo <= ehi && ehi <= 1.0) {
            return bad(format!("error_confidence [{elo}, {ehi}] must be an ordered range within [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.boundary_confidence) {
            return bad(format!("boundary_confidence {} outside [0, 1]", self.boundary_confidence));
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return bad(format!("frame_rate {}", self.frame_rate));
        }
        if self.frames_per_word() == 0 {
            return bad(format!(
                "word_duration {} is shorter than one frame at {} fps",
                self.word_duration, self.frame_rate
            ));
        }
        Ok(())
    }

    pub fn frames_per_word(&self) -> usize {
        let f = (self.word_duration * self.frame_rate).round();
        if f.is_finite() && f >= 1.0 {
            f as usize
        } else {
            0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Zone {
    Interior,
    /// Among the first words of a turn that follows another turn.
    TurnStart,
    /// Among the last words of a turn that is followed by another turn.
    TurnEnd,
}

/// Generation metadata for one word of the serialized transcript.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WordInfo {
    pub turn: usize,
    pub position_in_turn: usize,
    pub turn_len: usize,
    pub zone: Zone,
    /// Another speaker is active during part of this word.
    pub overlapped: bool,
    /// For boundary-zone words: the adjacent speaker change is signalled by
    /// the words themselves (question then answer, greeting, backchannel,
    /// discourse opener). Always false for interior words.
    pub lexically_cued: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedConversation {
    pub id: usize,
    pub reference: LabeledTranscript,
    /// Reference words with injected speaker errors.
    pub baseline: LabeledTranscript,
    /// Timed words carrying the baseline speaker.
    pub words: Vec<WordRecord>,
    pub posteriors: FramePosteriorMatrix,
    pub activity: SpeakerActivityLabels,
    /// Serialized word indices whose baseline speaker differs from the reference.
    pub injected: Vec<usize>,
    pub info: Vec<WordInfo>,
    pub num_speakers: usize,
}

impl SimulatedConversation {
    pub fn word_scores(&self, median_frames: usize) -> Result<Vec<SpeakerScoreVector>> {
        extract_word_scores(&self.posteriors, &self.words, median_frames)
    }

    /// Expected number of injected errors given the zone layout.
    pub fn expected_errors(&self, config: &SimulatorConfig) -> f64 {
        self.info
            .iter()
            .map(|i| match i.zone {
                Zone::Interior => config.error_rate_interior,
                _ => config.error_rate_at_boundaries,
            })
            .sum()
    }

    /// All windows with their reference speakers.
    pub fn labeled_windows(&self, params: WindowParams) -> Result<Vec<(CorrectionWindow, Vec<SpeakerId>)>> {
        let base = self.baseline.speakers();
        let truth = self.reference.speakers();
        Ok(make_windows(self.baseline.len(), params.window_size, params.stride)?
            .into_iter()
            .map(|span| (classify_window(&base, span.clone()), truth[span].to_vec()))
            .collect())
    }

    /// Two-speaker training windows with acoustic scores attached.
    pub fn training_windows(&self, params: WindowParams, scores: &[SpeakerScoreVector]) -> Result<Vec<TrainingWindow>> {
        training_windows(&self.reference, &self.baseline, scores, params)
    }
}

struct Turn {
    speaker: usize,
    words: Vec<String>,
    /// Words that belong to a question phrase ending the turn.
    ends_with_question: bool,
    cued_start: bool,
}

fn pick_other<R: Rng>(rng: &mut R, current: usize, n: usize) -> usize {
    let k = rng.random_range(0..n - 1);
    if k >= current {
        k + 1
    } else {
        k
    }
}

fn build_turns<R: Rng>(config: &SimulatorConfig, rng: &mut R) -> Vec<Turn> {
    let [lo, hi] = config.words_per_turn;
    let mut turns: Vec<Turn> = Vec::with_capacity(config.num_turns);
    let mut speaker = rng.random_range(0..config.num_speakers);
    for k in 0..config.num_turns {
        if k > 0 {
            speaker = pick_other(rng, speaker, config.num_speakers);
        }
        let prev = turns.last();
        let last = k + 1 == config.num_turns;
        let mut words = Vec::new();
        let mut cued_start = true;
        let mut backchannel = false;
        match prev {
            None => words.extend(phrase(Family::Greeting, rng)),
            Some(p) if p.ends_with_question || k == 1 => words.extend(phrase(Family::Answer, rng)),
            Some(p) if p.words.len() >= 4 && rng.random_bool(BACKCHANNEL_PROBABILITY) => {
                words.extend(phrase(Family::Backchannel, rng));
                backchannel = true;
            }
            Some(_) => {
                if rng.random_bool(OPENER_PROBABILITY) {
                    words.extend(phrase(Family::Opener, rng));
                } else {
                    cued_start = false;
                }
            }
        }
        let mut ends_with_question = false;
        if !backchannel {
            let target = rng.random_range(lo..=hi);
            let closing = if last && k > 0 { phrase(Family::Closing, rng) } else { Vec::new() };
            let question = if !last && rng.random_bool(QUESTION_PROBABILITY) {
                let mut q = phrase(Family::Question, rng);
                if rng.random_bool(SELF_ANSWER_PROBABILITY) {
                    q.extend(phrase(Family::Answer, rng));
                } else {
                    ends_with_question = true;
                }
                q
            } else {
                Vec::new()
            };
            let tail = closing.len() + question.len();
            while words.len() + tail < target {
                words.extend(phrase(Family::Statement, rng));
            }
            // Trim the body so the turn stays within the range where possible.
            let keep = hi.saturating_sub(tail).max(words.len().min(lo.max(1)));
            words.truncate(keep.max(1));
            words.extend(question);
            words.extend(closing);
        }
        turns.push(Turn {
            speaker,
            words,
            ends_with_question,
            cued_start: k > 0 && cued_start,
        });
    }
    turns
}

fn zone_of(position: usize, len: usize, has_prev: bool, has_next: bool) -> Zone {
    let from_start = if has_prev { position } else { usize::MAX };
    let from_end = if has_next { len - 1 - position } else { usize::MAX };
    if from_start.min(from_end) >= BOUNDARY_ZONE {
        Zone::Interior
    } else if from_start <= from_end {
        Zone::TurnStart
    } else {
        Zone::TurnEnd
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Generates one conversation. Dialogue structure, posterior noise and
/// error injection draw from separate streams of the seed, so changing the
/// noise level or error rates leaves the words and timings unchanged.
pub fn generate(config: &SimulatorConfig) -> Result<SimulatedConversation> {
    generate_with_id(config, 0)
}

fn generate_with_id(config: &SimulatorConfig, id: usize) -> Result<SimulatedConversation> {
    config.validate()?;
    let mut structure = stream(config.seed, 1);
    let mut noise_rng = stream(config.seed, 2);
    let mut error_rng = stream(config.seed, 3);
    let fpw = config.frames_per_word();
    let s = config.num_speakers;

    let turns = build_turns(config, &mut structure);

    // Timings: turns follow each other with a short pause or overlap.
    let mut starts = Vec::with_capacity(turns.len());
    let mut last_end = vec![0usize; s];
    let mut prev: Option<(usize, usize)> = None;
    for t in &turns {
        let frames = t.words.len() * fpw;
        let start = match prev {
            None => LEAD_FRAMES,
            Some((ps, pe)) => {
                let proposed = if structure.random_bool(config.overlap_probability) && pe - ps > 1 {
                    let max_overlap = (2 * fpw).min(pe - ps - 1);
                    pe - structure.random_range(1..=max_overlap)
                } else {
                    pe + structure.random_range(0..=fpw)
                };
                proposed.max(last_end[t.speaker]).max(ps + 1)
            }
        };
        starts.push(start);
        last_end[t.speaker] = start + frames;
        prev = Some((start, start + frames));
    }
    let num_frames = turns
        .iter()
        .zip(&starts)
        .map(|(t, &st)| st + t.words.len() * fpw)
        .max()
        .unwrap_or(0)
        + TAIL_FRAMES;

    let mut activity = SpeakerActivityLabels::new(num_frames, s, vec![false; num_frames * s])?;
    for (t, &st) in turns.iter().zip(&starts) {
        for f in st..st + t.words.len() * fpw {
            activity.set(f, t.speaker, true);
        }
    }

    // Per-turn words in generation order with metadata.
    struct Raw {
        text: String,
        speaker: usize,
        start: usize,
        info: WordInfo,
    }
    let mut raw = Vec::new();
    for (k, (t, &st)) in turns.iter().zip(&starts).enumerate() {
        let len = t.words.len();
        let has_prev = k > 0;
        let has_next = k + 1 < turns.len();
        for (j, w) in t.words.iter().enumerate() {
            let start = st + j * fpw;
            let overlapped = (start..start + fpw).any(|f| (0..s).any(|o| o != t.speaker && activity.get(f, o)));
            let zone = zone_of(j, len, has_prev, has_next);
            let lexically_cued = match zone {
                Zone::Interior => false,
                Zone::TurnStart => t.cued_start,
                Zone::TurnEnd => turns[k + 1].cued_start,
            };
            raw.push(Raw {
                text: w.clone(),
                speaker: t.speaker,
                start,
                info: WordInfo {
                    turn: k,
                    position_in_turn: j,
                    turn_len: len,
                    zone,
                    overlapped,
                    lexically_cued,
                },
            });
        }
    }

    // Baseline speakers: boundary zones flip together toward the adjacent
    // turn's speaker; interior words flip independently.
    let mut baseline_speaker: Vec<usize> = raw.iter().map(|r| r.speaker).collect();
    let mut offset = 0;
    for (k, t) in turns.iter().enumerate() {
        let len = t.words.len();
        let start_flip = error_rng.random::<f64>() < config.error_rate_at_boundaries;
        let end_flip = error_rng.random::<f64>() < config.error_rate_at_boundaries;
        for j in 0..len {
            let i = offset + j;
            match raw[i].info.zone {
                Zone::TurnStart if start_flip => baseline_speaker[i] = turns[k - 1].speaker,
                Zone::TurnEnd if end_flip => baseline_speaker[i] = turns[k + 1].speaker,
                Zone::Interior if error_rng.random::<f64>() < config.error_rate_interior => {
                    baseline_speaker[i] = pick_other(&mut error_rng, t.speaker, s);
                }
                _ => {}
            }
        }
        offset += len;
    }

    // Posteriors. The simulated diarizer agrees with the baseline: a flipped
    // word's frames lean weakly toward the baseline speaker, and correct
    // words near a turn change are less certain than interior ones.
    let margin = config.logit_margin;
    let mut clean: Vec<f64> = (0..num_frames * s)
        .map(|i| if activity.get(i / s, i % s) { margin } else { -margin })
        .collect();
    if config.posterior_noise > 0.0 {
        let [elo, ehi] = config.error_confidence;
        for (r, &b) in raw.iter().zip(&baseline_speaker) {
            let frames = r.start..r.start + fpw;
            if b != r.speaker {
                let w = margin * noise_rng.random_range(elo..=ehi);
                for f in frames {
                    clean[f * s + b] = w;
                    clean[f * s + r.speaker] = -w;
                }
            } else if r.info.zone != Zone::Interior || r.info.overlapped {
                let w = margin * noise_rng.random_range(config.boundary_confidence..=1.0);
                for f in frames {
                    clean[f * s + r.speaker] = w;
                }
            }
        }
    }
    let mut values = vec![0.0; num_frames * s];
    let rho = config.noise_correlation;
    let innovation = (1.0 - rho * rho).sqrt();
    for spk in 0..s {
        let mut n = 0.0;
        for f in 0..num_frames {
            values[f * s + spk] = if config.posterior_noise == 0.0 {
                f64::from(u8::from(activity.get(f, spk)))
            } else {
                let e: f64 = StandardNormal.sample(&mut noise_rng);
                n = if f == 0 { e } else { rho * n + innovation * e };
                sigmoid(clean[f * s + spk] + config.posterior_noise * n)
            };
        }
    }
    let posteriors = FramePosteriorMatrix::new(num_frames, s, values, 1.0 / config.frame_rate)?;

    // Serialize by start frame, then speaker.
    let timed: Vec<TimedWord> = raw
        .iter()
        .map(|r| TimedWord {
            start: r.start as f64,
            speaker: SpeakerId(r.speaker),
            text: r.text.clone(),
        })
        .collect();
    let order = serialization_order(&timed);
    let mut reference = Vec::with_capacity(raw.len());
    let mut baseline = Vec::with_capacity(raw.len());
    let mut words = Vec::with_capacity(raw.len());
    let mut info = Vec::with_capacity(raw.len());
    let mut injected = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        let r = &raw[i];
        reference.push(LabeledWord {
            text: r.text.clone(),
            speaker: SpeakerId(r.speaker),
        });
        baseline.push(LabeledWord {
            text: r.text.clone(),
            speaker: SpeakerId(baseline_speaker[i]),
        });
        words.push(WordRecord::new(r.text.clone(), r.start, r.start + fpw, SpeakerId(baseline_speaker[i]))?);
        info.push(r.info);
        if baseline_speaker[i] != r.speaker {
            injected.push(pos);
        }
    }

    Ok(SimulatedConversation {
        id,
        reference: LabeledTranscript::new(reference),
        baseline: LabeledTranscript::new(baseline),
        words,
        posteriors,
        activity,
        injected,
        info,
        num_speakers: s,
    })
}

/// Train / validation / test conversation counts: 10% each for validation
/// and test (at least one), the rest for training.
pub fn split_sizes(num_conversations: usize) -> Result<(usize, usize, usize)> {
    if num_conversations < 3 {
        return Err(CoreError::InvalidConfig(format!(
            "need at least 3 conversations for a split, got {num_conversations}"
        )));
    }
    let tenth = ((num_conversations as f64) / 10.0).round().max(1.0) as usize;
    Ok((num_conversations - 2 * tenth, tenth, tenth))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub config: SimulatorConfig,
    pub train: Vec<SimulatedConversation>,
    pub validation: Vec<SimulatedConversation>,
    pub test: Vec<SimulatedConversation>,
}

impl Corpus {
    pub fn all(&self) -> impl Iterator<Item = &SimulatedConversation> {
        self.train.iter().chain(&self.validation).chain(&self.test)
    }
}

/// Conversation `i` uses seed `config.seed + i`; the first 80% go to
/// training, then validation, then test.
pub fn corpus(config: &SimulatorConfig, num_conversations: usize) -> Result<Corpus> {
    let (n_train, n_val, _) = split_sizes(num_conversations)?;
    config.validate()?;
    let mut convs = (0..num_conversations)
        .map(|i| {
            let c = SimulatorConfig {
                seed: config.seed.wrapping_add(i as u64),
                ..config.clone()
            };
            generate_with_id(&c, i)
        })
        .collect::<Result<Vec<_>>>()?;
    let test = convs.split_off(n_train + n_val);
    let validation = convs.split_off(n_train);
    Ok(Corpus {
        config: config.clone(),
        train: convs,
        validation,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_conversation() {
        let c = SimulatorConfig::default();
        assert_eq!(generate(&c).unwrap(), generate(&c).unwrap());
        let other = SimulatorConfig { seed: 1, ..c.clone() };
        assert_ne!(generate(&c).unwrap().reference, generate(&other).unwrap().reference);
    }

    #[test]
    fn rejects_infeasible_configs() {
        let base = SimulatorConfig::default();
        for bad in [
            SimulatorConfig { num_turns: 0, ..base.clone() },
            SimulatorConfig { num_speakers: 5, ..base.clone() },
            SimulatorConfig { words_per_turn: [4, 3], ..base.clone() },
            SimulatorConfig { overlap_probability: 1.5, ..base.clone() },
            SimulatorConfig { word_duration: 0.01, ..base.clone() },
        ] {
            assert!(matches!(generate(&bad), Err(CoreError::InvalidConfig(_))));
        }
    }

    #[test]
    fn baseline_shares_reference_words() {
        let conv = generate(&SimulatorConfig {
            seed: 5,
            num_turns: 30,
            ..SimulatorConfig::default()
        })
        .unwrap();
        assert!(conv.reference.same_words(&conv.baseline));
        assert_eq!(conv.posteriors.num_frames(), conv.activity.num_frames());
        for (i, (r, b)) in conv.reference.words.iter().zip(&conv.baseline.words).enumerate() {
            assert_eq!(r.speaker != b.speaker, conv.injected.contains(&i));
        }
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_sizes(10).unwrap(), (8, 1, 1));
        assert_eq!(split_sizes(2000).unwrap(), (1600, 200, 200));
        assert_eq!(split_sizes(3).unwrap(), (1, 1, 1));
        assert!(split_sizes(2).is_err());
    }

    #[test]
    fn corpus_partitions_conversations() {
        let c = corpus(&SimulatorConfig::default(), 10).unwrap();
        assert_eq!((c.train.len(), c.validation.len(), c.test.len()), (8, 1, 1));
        let ids: Vec<usize> = c.all().map(|v| v.id).collect();
        assert_eq!(ids, (0..10).collect::<Vec<_>>());
    }
}
