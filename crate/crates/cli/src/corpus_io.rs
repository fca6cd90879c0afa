//! Corpus layout on disk and atomic output helpers.
//!
//! ```text
//! <out>/corpus.toml
//! <out>/{train,validation,test}/conv_NNNNN/
//!     posteriors.txt  words.ctm  reference.txt  baseline.txt  reference.rttm
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use aglsec_core::diarization::SpeakerActivityLabels;
use aglsec_core::scores::{extract_word_scores, SpeakerScoreVector};
use aglsec_core::synth::{SimulatedConversation, SimulatorConfig};
use aglsec_core::{LabeledTranscript, WordRecord};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CoreContext, Result};
use crate::formats::{
    ctm_line_numbers, ctm_to_words, parse_ctm, parse_posteriors, parse_transcript, read_text, write_ctm,
    write_posteriors, write_rttm, write_transcript, CtmEntry, PosteriorFile, RttmSegment,
};

pub const CORPUS_FILE: &str = "corpus.toml";
pub const SPLITS: [&str; 3] = ["train", "validation", "test"];

/// The `corpus.toml` written next to the split directories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub num_conversations: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub simulator: SimulatorConfig,
}

/// A conversation read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedConversation {
    pub name: String,
    pub posteriors: PosteriorFile,
    pub words: Vec<WordRecord>,
    pub reference: LabeledTranscript,
    pub baseline: LabeledTranscript,
}

impl LoadedConversation {
    pub fn scores(&self, median_frames: usize) -> Result<Vec<SpeakerScoreVector>> {
        extract_word_scores(&self.posteriors.matrix, &self.words, median_frames)
            .context(|| format!("{}: score extraction", self.name))
    }
}

pub fn conversation_name(id: usize) -> String {
    format!("conv_{id:05}")
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_file_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

fn write_new(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// Builds a directory in a sibling temporary location and renames it onto
/// `out` once `fill` succeeds. An existing `out` is replaced only if it is
/// empty or holds `marker` (i.e. an earlier output of the same command).
pub fn write_dir_atomic(out: &Path, marker: &str, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    if out.exists() {
        let is_empty = out.is_dir() && fs::read_dir(out).map_err(|e| CliError::io(out, e))?.next().is_none();
        if !is_empty && !out.join(marker).is_file() {
            return Err(CliError::Usage(format!(
                "{} exists and does not look like an earlier output (no {marker}); refusing to replace it",
                out.display()
            )));
        }
    }
    create_dir(&parent)?;
    let staging = tempfile::Builder::new()
        .prefix(".aglsec-staging")
        .tempdir_in(&parent)
        .map_err(|e| CliError::io(&parent, e))?;
    fill(staging.path())?;
    let staged = staging.keep();
    if out.exists() {
        let old = tempfile::Builder::new()
            .prefix(".aglsec-old")
            .tempdir_in(&parent)
            .map_err(|e| CliError::io(&parent, e))?;
        let old_path = old.path().join("previous");
        fs::rename(out, &old_path).map_err(|e| CliError::io(out, e))?;
        if let Err(e) = fs::rename(&staged, out) {
            let _ = fs::rename(&old_path, out);
            let _ = fs::remove_dir_all(&staged);
            return Err(CliError::io(out, e));
        }
        drop(old);
    } else if let Err(e) = fs::rename(&staged, out) {
        let _ = fs::remove_dir_all(&staged);
        return Err(CliError::io(out, e));
    }
    Ok(())
}

fn ctm_entries(name: &str, words: &[WordRecord], frame_rate: f64) -> Vec<CtmEntry> {
    words
        .iter()
        .map(|w| CtmEntry {
            recording: name.to_string(),
            channel: "1".into(),
            start: w.start_frame as f64 / frame_rate,
            duration: w.frame_count() as f64 / frame_rate,
            word: w.text.clone(),
            confidence: None,
        })
        .collect()
}

/// One segment per maximal run of active frames, per speaker.
pub fn activity_segments(name: &str, activity: &SpeakerActivityLabels, frame_rate: f64) -> Vec<RttmSegment> {
    let mut segs = Vec::new();
    let t = activity.num_frames();
    for s in 0..activity.num_speakers() {
        let mut f = 0;
        while f < t {
            if !activity.get(f, s) {
                f += 1;
                continue;
            }
            let start = f;
            while f < t && activity.get(f, s) {
                f += 1;
            }
            segs.push(RttmSegment::new(
                name,
                start as f64 / frame_rate,
                (f - start) as f64 / frame_rate,
                &format!("spk{s}"),
            ));
        }
    }
    segs.sort_by(|a, b| a.start.total_cmp(&b.start).then_with(|| a.speaker.cmp(&b.speaker)));
    segs
}

fn write_conversation(dir: &Path, c: &SimulatedConversation, frame_rate: f64) -> Result<()> {
    let name = conversation_name(c.id);
    let d = dir.join(&name);
    create_dir(&d)?;
    let posteriors = PosteriorFile {
        frame_rate,
        matrix: c.posteriors.clone(),
    };
    write_new(&d.join("posteriors.txt"), write_posteriors(&posteriors).as_bytes())?;
    write_new(&d.join("words.ctm"), write_ctm(&ctm_entries(&name, &c.words, frame_rate))?.as_bytes())?;
    write_new(&d.join("reference.txt"), write_transcript(&c.reference)?.as_bytes())?;
    write_new(&d.join("baseline.txt"), write_transcript(&c.baseline)?.as_bytes())?;
    write_new(
        &d.join("reference.rttm"),
        write_rttm(&activity_segments(&name, &c.activity, frame_rate))?.as_bytes(),
    )?;
    Ok(())
}

/// Writes a generated corpus under `out`, all or nothing.
pub fn write_corpus(out: &Path, corpus: &aglsec_core::synth::Corpus) -> Result<()> {
    let manifest = CorpusManifest {
        num_conversations: corpus.train.len() + corpus.validation.len() + corpus.test.len(),
        train: corpus.train.len(),
        validation: corpus.validation.len(),
        test: corpus.test.len(),
        simulator: corpus.config.clone(),
    };
    let text = toml::to_string(&manifest).map_err(|e| CliError::Internal(e.to_string()))?;
    let rate = corpus.config.frame_rate;
    write_dir_atomic(out, CORPUS_FILE, |dir| {
        for (split, convs) in SPLITS.iter().zip([&corpus.train, &corpus.validation, &corpus.test]) {
            let sd = dir.join(split);
            create_dir(&sd)?;
            for c in convs {
                write_conversation(&sd, c, rate)?;
            }
        }
        write_new(&dir.join(CORPUS_FILE), text.as_bytes())
    })
}

pub fn read_corpus_manifest(dir: &Path) -> Result<CorpusManifest> {
    let path = dir.join(CORPUS_FILE);
    let text = read_text(&path)?;
    toml::from_str(&text).map_err(|e| CliError::format(&path, toml_line(&text, &e), e.message().to_string()))
}

/// 1-based line of a TOML parse error, 1 when unknown.
pub fn toml_line(text: &str, e: &toml::de::Error) -> usize {
    e.span().map_or(1, |s| text[..s.start.min(text.len())].lines().count().max(1))
}

/// Reads one conversation directory and checks that its files agree.
pub fn load_conversation(dir: &Path) -> Result<LoadedConversation> {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ppath = dir.join("posteriors.txt");
    let posteriors = parse_posteriors(&read_text(&ppath)?, &ppath)?;
    let rpath = dir.join("reference.txt");
    let reference = parse_transcript(&read_text(&rpath)?, &rpath)?;
    let bpath = dir.join("baseline.txt");
    let baseline = parse_transcript(&read_text(&bpath)?, &bpath)?;
    let cpath = dir.join("words.ctm");
    let words = read_words(&cpath, posteriors.frame_rate, &baseline, &bpath)?;
    if !reference.same_words(&baseline) {
        return Err(CliError::format(&rpath, 1, "reference words differ from the baseline words"));
    }
    Ok(LoadedConversation {
        name,
        posteriors,
        words,
        reference,
        baseline,
    })
}

/// Reads a CTM and attaches the baseline speakers; the words must match the
/// baseline transcript one for one.
pub fn read_words(ctm_path: &Path, frame_rate: f64, baseline: &LabeledTranscript, baseline_path: &Path) -> Result<Vec<WordRecord>> {
    let text = read_text(ctm_path)?;
    let entries = parse_ctm(&text, ctm_path)?;
    let lines = ctm_line_numbers(&text);
    if entries.len() != baseline.len() {
        return Err(CliError::format(
            baseline_path,
            1,
            format!("{} baseline words but {} CTM words in {}", baseline.len(), entries.len(), ctm_path.display()),
        ));
    }
    for (i, (e, w)) in entries.iter().zip(&baseline.words).enumerate() {
        if e.word != w.text {
            return Err(CliError::format(
                ctm_path,
                lines[i],
                format!("CTM word `{}` but baseline word {i} is `{}`", e.word, w.text),
            ));
        }
    }
    ctm_to_words(&entries, frame_rate, Some(&baseline.speakers()), ctm_path, &lines)
}

/// Conversations of one split, in name order.
pub fn load_split(corpus_dir: &Path, split: &str) -> Result<Vec<LoadedConversation>> {
    if !SPLITS.contains(&split) {
        return Err(CliError::Usage(format!("unknown split `{split}`; expected one of {SPLITS:?}")));
    }
    read_corpus_manifest(corpus_dir)?;
    let sd = corpus_dir.join(split);
    let mut dirs = Vec::new();
    for entry in fs::read_dir(&sd).map_err(|e| CliError::io(&sd, e))? {
        let entry = entry.map_err(|e| CliError::io(&sd, e))?;
        if entry.path().is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    dirs.iter().map(|d| load_conversation(d)).collect()
}
