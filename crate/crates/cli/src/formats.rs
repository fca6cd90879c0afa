//! Line-oriented text formats: CTM, RTTM, transcripts, word scores and
//! frame posteriors. Floats are written with Rust's shortest round-trip
//! representation so every writer/parser pair is lossless.

use std::fmt::Write as _;
use std::path::Path;

use aglsec_core::diarization::FramePosteriorMatrix;
use aglsec_core::scores::SpeakerScoreVector;
use aglsec_core::{LabeledTranscript, LabeledWord, SpeakerId, WordRecord};

use crate::error::{CliError, Result};

/// Non-empty, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with(";;"))
}

fn parse_num<T: std::str::FromStr>(path: &Path, line: usize, field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| CliError::format(path, line, format!("bad {what} `{field}`")))
}

fn parse_finite(path: &Path, line: usize, field: &str, what: &str) -> Result<f64> {
    let v: f64 = parse_num(path, line, field, what)?;
    if !v.is_finite() {
        return Err(CliError::format(path, line, format!("{what} must be finite, got `{field}`")));
    }
    Ok(v)
}

fn check_token(s: &str, what: &str) -> Result<()> {
    if s.is_empty() || s.chars().any(char::is_whitespace) || s.starts_with(";;") {
        return Err(CliError::Internal(format!("{what} `{s}` cannot be written as a single field")));
    }
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

// ---------------------------------------------------------------- CTM

#[derive(Clone, Debug, PartialEq)]
pub struct CtmEntry {
    pub recording: String,
    pub channel: String,
    pub start: f64,
    pub duration: f64,
    pub word: String,
    pub confidence: Option<f64>,
}

impl CtmEntry {
    /// Frame span `[round(start*rate), round((start+dur)*rate))`.
    pub fn frames(&self, frame_rate: f64) -> (usize, usize) {
        let start = (self.start * frame_rate).round().max(0.0) as usize;
        let end = ((self.start + self.duration) * frame_rate).round().max(0.0) as usize;
        (start, end)
    }
}

pub fn parse_ctm(text: &str, path: &Path) -> Result<Vec<CtmEntry>> {
    content_lines(text)
        .map(|(n, line)| {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 5 && f.len() != 6 {
                return Err(CliError::format(path, n, format!("expected 5 or 6 CTM fields, got {}", f.len())));
            }
            let start = parse_finite(path, n, f[2], "start time")?;
            let duration = parse_finite(path, n, f[3], "duration")?;
            if start < 0.0 || duration < 0.0 {
                return Err(CliError::format(path, n, "negative start or duration"));
            }
            let confidence = match f.get(5) {
                Some(c) => Some(parse_finite(path, n, c, "confidence")?),
                None => None,
            };
            Ok(CtmEntry {
                recording: f[0].to_string(),
                channel: f[1].to_string(),
                start,
                duration,
                word: f[4].to_string(),
                confidence,
            })
        })
        .collect()
}

pub fn write_ctm(entries: &[CtmEntry]) -> Result<String> {
    let mut out = String::new();
    for e in entries {
        check_token(&e.recording, "recording")?;
        check_token(&e.channel, "channel")?;
        check_token(&e.word, "word")?;
        write!(out, "{} {} {} {} {}", e.recording, e.channel, e.start, e.duration, e.word).unwrap();
        if let Some(c) = e.confidence {
            write!(out, " {c}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// Converts CTM entries to word records. Every word must cover at least one
/// frame. Baseline speakers come from `speakers` when given, else 0.
pub fn ctm_to_words(
    entries: &[CtmEntry],
    frame_rate: f64,
    speakers: Option<&[SpeakerId]>,
    path: &Path,
    lines: &[usize],
) -> Result<Vec<WordRecord>> {
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let (s, t) = e.frames(frame_rate);
            let speaker = speakers.map_or(SpeakerId(0), |sp| sp[i]);
            WordRecord::new(e.word.clone(), s, t, speaker).map_err(|err| {
                CliError::format(path, lines[i], format!("word `{}`: {err}", e.word))
            })
        })
        .collect()
}

/// Line numbers of the entries [`parse_ctm`] returns, in order.
pub fn ctm_line_numbers(text: &str) -> Vec<usize> {
    content_lines(text).map(|(n, _)| n).collect()
}

// ---------------------------------------------------------------- RTTM

#[derive(Clone, Debug, PartialEq)]
pub struct RttmSegment {
    pub file: String,
    pub channel: String,
    pub start: f64,
    pub duration: f64,
    pub ortho: String,
    pub subtype: String,
    pub speaker: String,
    pub confidence: String,
    pub lookahead: String,
}

impl RttmSegment {
    pub fn new(file: &str, start: f64, duration: f64, speaker: &str) -> Self {
        Self {
            file: file.to_string(),
            channel: "1".into(),
            start,
            duration,
            ortho: "<NA>".into(),
            subtype: "<NA>".into(),
            speaker: speaker.to_string(),
            confidence: "<NA>".into(),
            lookahead: "<NA>".into(),
        }
    }
}

pub fn parse_rttm(text: &str, path: &Path) -> Result<Vec<RttmSegment>> {
    content_lines(text)
        .map(|(n, line)| {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 10 {
                return Err(CliError::format(path, n, format!("expected 10 RTTM fields, got {}", f.len())));
            }
            if f[0] != "SPEAKER" {
                return Err(CliError::format(path, n, format!("unsupported RTTM type `{}`", f[0])));
            }
            let start = parse_finite(path, n, f[3], "onset")?;
            let duration = parse_finite(path, n, f[4], "duration")?;
            if start < 0.0 || duration < 0.0 {
                return Err(CliError::format(path, n, "negative onset or duration"));
            }
            Ok(RttmSegment {
                file: f[1].into(),
                channel: f[2].into(),
                start,
                duration,
                ortho: f[5].into(),
                subtype: f[6].into(),
                speaker: f[7].into(),
                confidence: f[8].into(),
                lookahead: f[9].into(),
            })
        })
        .collect()
}

pub fn write_rttm(segments: &[RttmSegment]) -> Result<String> {
    let mut out = String::new();
    for s in segments {
        for (v, what) in [
            (&s.file, "file"),
            (&s.channel, "channel"),
            (&s.ortho, "ortho"),
            (&s.subtype, "subtype"),
            (&s.speaker, "speaker"),
            (&s.confidence, "confidence"),
            (&s.lookahead, "lookahead"),
        ] {
            check_token(v, what)?;
        }
        writeln!(
            out,
            "SPEAKER {} {} {} {} {} {} {} {} {}",
            s.file, s.channel, s.start, s.duration, s.ortho, s.subtype, s.speaker, s.confidence, s.lookahead
        )
        .unwrap();
    }
    Ok(out)
}

// ---------------------------------------------------------- transcripts

/// `<index> <word> <speaker>`, indices 0, 1, 2, ... in order.
pub fn parse_transcript(text: &str, path: &Path) -> Result<LabeledTranscript> {
    let mut words = Vec::new();
    for (n, line) in content_lines(text) {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(CliError::format(path, n, format!("expected `<index> <word> <speaker>`, got {} fields", f.len())));
        }
        let index: usize = parse_num(path, n, f[0], "word index")?;
        if index != words.len() {
            return Err(CliError::format(path, n, format!("word index {index}, expected {}", words.len())));
        }
        let speaker: usize = parse_num(path, n, f[2], "speaker id")?;
        words.push(LabeledWord {
            text: f[1].to_string(),
            speaker: SpeakerId(speaker),
        });
    }
    Ok(LabeledTranscript::new(words))
}

pub fn write_transcript(t: &LabeledTranscript) -> Result<String> {
    let mut out = String::new();
    for (i, w) in t.words.iter().enumerate() {
        check_token(&w.text, "word")?;
        writeln!(out, "{i} {} {}", w.text, w.speaker).unwrap();
    }
    Ok(out)
}

// --------------------------------------------------------------- scores

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreFile {
    pub num_speakers: usize,
    pub words: Vec<String>,
    pub scores: Vec<SpeakerScoreVector>,
}

/// Header `N S`, then `<index> <word> <ok|low> s_1 .. s_S` per word.
pub fn parse_scores(text: &str, path: &Path) -> Result<ScoreFile> {
    let mut lines = content_lines(text);
    let (hn, header) = lines
        .next()
        .ok_or_else(|| CliError::format(path, 1, "missing `N S` header"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 2 {
        return Err(CliError::format(path, hn, "header must be `N S`"));
    }
    let n: usize = parse_num(path, hn, h[0], "word count")?;
    let s: usize = parse_num(path, hn, h[1], "speaker count")?;
    if s == 0 {
        return Err(CliError::format(path, hn, "speaker count must be positive"));
    }
    let mut words = Vec::with_capacity(n);
    let mut scores = Vec::with_capacity(n);
    for (ln, line) in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 + s {
            return Err(CliError::format(path, ln, format!("expected {} fields, got {}", 3 + s, f.len())));
        }
        let index: usize = parse_num(path, ln, f[0], "word index")?;
        if index != words.len() {
            return Err(CliError::format(path, ln, format!("word index {index}, expected {}", words.len())));
        }
        let low_confidence = match f[2] {
            "ok" => false,
            "low" => true,
            other => return Err(CliError::format(path, ln, format!("confidence flag must be ok or low, got `{other}`"))),
        };
        let row = f[3..]
            .iter()
            .map(|v| {
                let x = parse_finite(path, ln, v, "score")?;
                if !(0.0..=1.0).contains(&x) {
                    return Err(CliError::format(path, ln, format!("score {x} outside [0, 1]")));
                }
                Ok(x)
            })
            .collect::<Result<Vec<f64>>>()?;
        words.push(f[1].to_string());
        scores.push(SpeakerScoreVector {
            scores: row,
            low_confidence,
        });
    }
    if words.len() != n {
        return Err(CliError::format(path, hn, format!("header announces {n} words, file has {}", words.len())));
    }
    Ok(ScoreFile {
        num_speakers: s,
        words,
        scores,
    })
}

pub fn write_scores(file: &ScoreFile) -> Result<String> {
    if file.words.len() != file.scores.len() {
        return Err(CliError::Internal("score rows and words differ in length".into()));
    }
    let mut out = format!("{} {}\n", file.words.len(), file.num_speakers);
    for (i, (w, s)) in file.words.iter().zip(&file.scores).enumerate() {
        check_token(w, "word")?;
        if s.scores.len() != file.num_speakers {
            return Err(CliError::Internal(format!("row {i} has {} scores", s.scores.len())));
        }
        write!(out, "{i} {w} {}", if s.low_confidence { "low" } else { "ok" }).unwrap();
        for v in &s.scores {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

// ----------------------------------------------------------- posteriors

/// A posterior matrix together with the frame rate it was written with.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorFile {
    pub frame_rate: f64,
    pub matrix: FramePosteriorMatrix,
}

impl PosteriorFile {
    pub fn new(frame_rate: f64, num_frames: usize, num_speakers: usize, values: Vec<f64>) -> aglsec_core::Result<Self> {
        Ok(Self {
            frame_rate,
            matrix: FramePosteriorMatrix::new(num_frames, num_speakers, values, 1.0 / frame_rate)?,
        })
    }
}

/// Header `T S frame_rate`, then T rows of S values.
pub fn parse_posteriors(text: &str, path: &Path) -> Result<PosteriorFile> {
    let mut lines = content_lines(text);
    let (hn, header) = lines
        .next()
        .ok_or_else(|| CliError::format(path, 1, "missing `T S frame_rate` header"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 3 {
        return Err(CliError::format(path, hn, "header must be `T S frame_rate`"));
    }
    let t: usize = parse_num(path, hn, h[0], "frame count")?;
    let s: usize = parse_num(path, hn, h[1], "speaker count")?;
    let rate = parse_finite(path, hn, h[2], "frame rate")?;
    if rate <= 0.0 {
        return Err(CliError::format(path, hn, "frame rate must be positive"));
    }
    let mut values = Vec::with_capacity(t * s);
    let mut rows = 0;
    for (ln, line) in lines {
        let before = values.len();
        for v in line.split_whitespace() {
            let x = parse_finite(path, ln, v, "posterior")?;
            if !(0.0..=1.0).contains(&x) {
                return Err(CliError::format(path, ln, format!("posterior {x} outside [0, 1]")));
            }
            values.push(x);
        }
        if values.len() - before != s {
            return Err(CliError::format(path, ln, format!("expected {s} values, got {}", values.len() - before)));
        }
        rows += 1;
    }
    if rows != t {
        return Err(CliError::format(path, hn, format!("header announces {t} frames, file has {rows}")));
    }
    PosteriorFile::new(rate, t, s, values).map_err(|e| CliError::format(path, hn, e.to_string()))
}

pub fn write_posteriors(p: &PosteriorFile) -> String {
    let m = &p.matrix;
    let mut out = format!("{} {} {}\n", m.num_frames(), m.num_speakers(), p.frame_rate);
    for f in 0..m.num_frames() {
        let row: Vec<String> = m.row(f).iter().map(f64::to_string).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("x")
    }

    #[test]
    fn ctm_with_and_without_confidence() {
        let text = ";; comment\nrec 1 0.5 0.3 hello 0.9\n\nrec 1 0.8 0.3 there\n";
        let e = parse_ctm(text, p()).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].confidence, Some(0.9));
        assert_eq!(e[1].confidence, None);
        assert_eq!(e[0].frames(10.0), (5, 8));
        assert_eq!(ctm_line_numbers(text), vec![2, 4]);
        assert_eq!(parse_ctm(&write_ctm(&e).unwrap(), p()).unwrap(), e);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_transcript("0 a 0\n2 b 1\n", p()).unwrap_err();
        assert!(matches!(err, CliError::Format { line: 2, .. }), "{err}");
        let err = parse_ctm("r 1 x 0.3 w\n", p()).unwrap_err();
        assert!(err.to_string().contains("x:1"), "{err}");
        let err = parse_posteriors("2 2 10\n0.1 0.2\n", p()).unwrap_err();
        assert!(err.to_string().contains("2 frames"), "{err}");
        assert!(parse_posteriors("1 1 10\n1.5\n", p()).is_err());
        assert!(parse_scores("1 2\n0 w maybe 0.5 0.5\n", p()).is_err());
    }

    #[test]
    fn rttm_fields() {
        let line = "SPEAKER conv 1 0.1 2.5 <NA> <NA> spk0 <NA> <NA>\n";
        let s = parse_rttm(line, p()).unwrap();
        assert_eq!(s[0], RttmSegment::new("conv", 0.1, 2.5, "spk0"));
        assert_eq!(write_rttm(&s).unwrap(), line);
        assert!(parse_rttm("LEXEME conv 1 0 1 a b c d e\n", p()).is_err());
    }

    #[test]
    fn unwritable_tokens_are_rejected() {
        let t = LabeledTranscript::from_pairs([("two words", 0)]);
        assert!(matches!(write_transcript(&t), Err(CliError::Internal(_))));
    }
}
