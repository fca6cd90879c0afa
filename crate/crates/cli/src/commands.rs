//! Command implementations. Each returns what it wrote so callers and tests
//! can inspect results without re-reading files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use aglsec_core::corrector::{
    load_model, model_to_bytes, train, Corrector, CorrectorConfig, CorrectorModel, EpochLog, IdentityCorrector,
    ModelKind, TrainConfig, TrainingWindow,
};
use aglsec_core::experiment::{run_experiment, ExperimentConfig, ExperimentReport};
use aglsec_core::scores::extract_word_scores;
use aglsec_core::scoring::{error_accounting, wder_transcripts, ErrorAccounting, WderBreakdown};
use aglsec_core::synth::{corpus, SimulatorConfig};
use aglsec_core::tokenizer::Vocabulary;
use aglsec_core::windowing::{correct_transcript, training_windows, WindowParams};
use aglsec_core::LabeledTranscript;
use serde::{Deserialize, Serialize};

use crate::corpus_io::{load_split, read_words, toml_line, write_corpus, write_dir_atomic, write_file_atomic};
use crate::error::{CliError, CoreContext, Result};
use crate::formats::{
    ctm_line_numbers, ctm_to_words, parse_ctm, parse_posteriors, parse_transcript, read_text, write_scores,
    write_transcript, ScoreFile,
};
use crate::manifest::PipelineManifest;

pub const REPORT_TEXT: &str = "report.txt";
pub const REPORT_TOML: &str = "report.toml";

fn default_conversations() -> usize {
    ExperimentConfig::default().num_conversations
}

/// Contents of a `simulate --config` file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_conversations")]
    pub num_conversations: usize,
    #[serde(default)]
    pub simulator: SimulatorConfig,
}

pub fn load_simulate_config(path: &Path) -> Result<SimulateConfig> {
    let text = read_text(path)?;
    toml::from_str(&text).map_err(|e| CliError::format(path, toml_line(&text, &e), e.message().to_string()))
}

pub fn simulate(config: &SimulateConfig, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut sim = config.simulator.clone();
    if let Some(s) = seed {
        sim.seed = s;
    }
    let data = corpus(&sim, config.num_conversations).context(|| "simulate".into())?;
    write_corpus(out, &data)
}

pub fn extract_scores(posteriors: &Path, ctm: &Path, median_frames: usize, out: &Path) -> Result<ScoreFile> {
    let p = parse_posteriors(&read_text(posteriors)?, posteriors)?;
    let text = read_text(ctm)?;
    let entries = parse_ctm(&text, ctm)?;
    let lines = ctm_line_numbers(&text);
    let words = ctm_to_words(&entries, p.frame_rate, None, ctm, &lines)?;
    // Validate spans here so the error can name the CTM line.
    for (w, line) in words.iter().zip(&lines) {
        if w.end_frame > p.matrix.num_frames() {
            return Err(CliError::format(
                ctm,
                *line,
                format!(
                    "word `{}` spans frames [{}, {}) beyond the {} frames of {}",
                    w.text,
                    w.start_frame,
                    w.end_frame,
                    p.matrix.num_frames(),
                    posteriors.display()
                ),
            ));
        }
    }
    let scores = extract_word_scores(&p.matrix, &words, median_frames).context(|| format!("{}", ctm.display()))?;
    let file = ScoreFile {
        num_speakers: p.matrix.num_speakers(),
        words: entries.into_iter().map(|e| e.word).collect(),
        scores,
    };
    write_file_atomic(out, write_scores(&file)?.as_bytes())?;
    Ok(file)
}

#[derive(Clone, Debug)]
pub struct TrainArgs {
    pub corpus: PathBuf,
    pub kind: ModelKind,
    pub init: Option<PathBuf>,
    pub train: TrainConfig,
    pub median_frames: usize,
    pub window: WindowParams,
    pub max_vocab: usize,
    pub out: PathBuf,
}

pub fn read_model(path: &Path) -> Result<CorrectorModel> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    load_model(BufReader::new(f)).context(|| format!("{}", path.display()))
}

pub fn train_model(args: &TrainArgs) -> Result<(CorrectorModel, Vec<EpochLog>)> {
    let convs = load_split(&args.corpus, "train")?;
    let init = args.init.as_deref().map(read_model).transpose()?;
    let vocab = match &init {
        Some(m) => m.vocab.clone(),
        None => Vocabulary::build(
            convs.iter().flat_map(|c| c.reference.words.iter().map(|w| w.text.as_str())),
            args.max_vocab,
        )
        .context(|| "vocabulary".into())?,
    };
    let (model, log) = if args.kind == ModelKind::Identity {
        (CorrectorModel::identity(vocab), Vec::new())
    } else {
        let config = init.as_ref().map_or(CorrectorConfig::desk(vocab.len()), |m| m.config);
        let mut windows: Vec<TrainingWindow> = Vec::new();
        for c in &convs {
            let scores = c.scores(args.median_frames)?;
            windows.extend(
                training_windows(&c.reference, &c.baseline, &scores, args.window).context(|| c.name.clone())?,
            );
        }
        train(args.kind, config, &vocab, &windows, &args.train, init.as_ref()).context(|| "training".into())?
    };
    write_file_atomic(&args.out, &model_to_bytes(&model))?;
    Ok((model, log))
}

/// Per-conversation numbers in `report.toml`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub wder: f64,
    pub c_is: usize,
    pub s_is: usize,
    pub denominator: usize,
    pub baseline_errors: usize,
    pub corrected_errors: usize,
    pub fixed: usize,
    pub broken: usize,
    pub corrected_pct: f64,
    pub introduced_pct: f64,
}

impl ScoreRecord {
    fn new(w: &WderBreakdown, a: &ErrorAccounting) -> Self {
        Self {
            wder: w.wder,
            c_is: w.c_is,
            s_is: w.s_is,
            denominator: w.denominator,
            baseline_errors: a.baseline_errors,
            corrected_errors: a.corrected_errors,
            fixed: a.fixed,
            broken: a.broken,
            corrected_pct: a.corrected_pct,
            introduced_pct: a.introduced_pct,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub aggregate: ScoreRecord,
    pub conversations: BTreeMap<String, ScoreRecord>,
}

impl ScoreReport {
    pub fn text(&self) -> String {
        let mut out = format!(
            "{:<16} {:>8} {:>6} {:>6} {:>7} {:>7} {:>7} {:>8} {:>8}\n",
            "conversation", "wder%", "c_is", "s_is", "denom", "fixed", "broken", "corr%", "introd%"
        );
        let rows = self.conversations.iter().map(|(k, v)| (k.as_str(), v));
        for (name, r) in rows.chain(std::iter::once(("aggregate", &self.aggregate))) {
            writeln!(
                out,
                "{:<16} {:>8.3} {:>6} {:>6} {:>7} {:>7} {:>7} {:>8.2} {:>8.2}",
                name,
                100.0 * r.wder,
                r.c_is,
                r.s_is,
                r.denominator,
                r.fixed,
                r.broken,
                r.corrected_pct,
                r.introduced_pct
            )
            .unwrap();
        }
        out
    }
}

/// One (name, reference, baseline, hypothesis) triple to score.
pub struct ScoreInput<'a> {
    pub name: String,
    pub reference: &'a LabeledTranscript,
    pub baseline: &'a LabeledTranscript,
    pub hypothesis: &'a LabeledTranscript,
}

pub fn build_report(inputs: &[ScoreInput<'_>]) -> Result<ScoreReport> {
    let mut conversations = BTreeMap::new();
    let mut wders = Vec::new();
    let mut accounts = Vec::new();
    for i in inputs {
        let w = wder_transcripts(i.reference, i.hypothesis).context(|| i.name.clone())?;
        let a = error_accounting(i.baseline, i.hypothesis, i.reference).context(|| i.name.clone())?;
        conversations.insert(i.name.clone(), ScoreRecord::new(&w, &a));
        wders.push(w);
        accounts.push(a);
    }
    let total = WderBreakdown::aggregate(&wders).context(|| "aggregate".into())?;
    Ok(ScoreReport {
        aggregate: ScoreRecord::new(&total, &ErrorAccounting::aggregate(&accounts)),
        conversations,
    })
}

fn report_files(report: &ScoreReport) -> Result<(String, String)> {
    let toml = toml::to_string(report).map_err(|e| CliError::Internal(e.to_string()))?;
    Ok((report.text(), toml))
}

pub fn write_report_into(dir: &Path, report: &ScoreReport) -> Result<()> {
    let (text, toml) = report_files(report)?;
    write_file_atomic(&dir.join(REPORT_TEXT), text.as_bytes())?;
    write_file_atomic(&dir.join(REPORT_TOML), toml.as_bytes())
}

/// `*.txt` files under `dir`, as sorted relative paths.
fn relative_files(dir: &Path) -> Result<Vec<PathBuf>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        for e in std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
            let p = e.map_err(|e| CliError::io(dir, e))?.path();
            if p.is_dir() {
                walk(root, &p, out)?;
            } else if p.is_file() && p.extension().is_some_and(|e| e == "txt") {
                out.push(p.strip_prefix(root).expect("walk stays under root").to_path_buf());
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}

fn read_transcript(path: &Path) -> Result<LabeledTranscript> {
    parse_transcript(&read_text(path)?, path)
}

/// Scores single files, or directories of `*.txt` transcripts paired by
/// relative path.
pub fn score(reference: &Path, baseline: &Path, hypothesis: &Path, out: &Path) -> Result<ScoreReport> {
    let triples: Vec<(String, PathBuf, PathBuf, PathBuf)> = if reference.is_dir() {
        relative_files(reference)?
            .into_iter()
            .map(|rel| {
                let name = rel.to_string_lossy().into_owned();
                (name, reference.join(&rel), baseline.join(&rel), hypothesis.join(&rel))
            })
            .collect()
    } else {
        let name = reference
            .file_stem()
            .map_or_else(|| "conversation".into(), |s| s.to_string_lossy().into_owned());
        vec![(name, reference.to_path_buf(), baseline.to_path_buf(), hypothesis.to_path_buf())]
    };
    if triples.is_empty() {
        return Err(CliError::Usage(format!("no transcripts under {}", reference.display())));
    }
    let loaded = triples
        .iter()
        .map(|(n, r, b, h)| Ok((n.clone(), read_transcript(r)?, read_transcript(b)?, read_transcript(h)?)))
        .collect::<Result<Vec<_>>>()?;
    let inputs: Vec<ScoreInput<'_>> = loaded
        .iter()
        .map(|(n, r, b, h)| ScoreInput {
            name: n.clone(),
            reference: r,
            baseline: b,
            hypothesis: h,
        })
        .collect();
    let report = build_report(&inputs)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_report_into(out, &report)?;
    Ok(report)
}

pub struct CorrectOutput {
    pub corrected: LabeledTranscript,
    pub report: Option<ScoreReport>,
}

fn corrector_from(model: Option<&Path>) -> Result<Box<dyn Corrector>> {
    Ok(match model {
        Some(p) => Box::new(read_model(p)?),
        None => Box::new(IdentityCorrector),
    })
}

/// Writes `corrected.txt` and `scores.txt`, plus the score report when the
/// manifest names a reference.
pub fn correct(manifest_path: &Path) -> Result<CorrectOutput> {
    let m = PipelineManifest::load(manifest_path)?;
    let p = parse_posteriors(&read_text(&m.posteriors)?, &m.posteriors)?;
    let baseline = read_transcript(&m.baseline)?;
    let rate = m.frame_rate.unwrap_or(p.frame_rate);
    let words = read_words(&m.words, rate, &baseline, &m.baseline)?;
    let scores = extract_word_scores(&p.matrix, &words, m.median_frames).context(|| m.words.display().to_string())?;
    let corrector = corrector_from(m.model.as_deref())?;
    let corrected = correct_transcript(&baseline, &scores, corrector.as_ref(), m.window)
        .context(|| "correction".into())?
        .transcript;

    let score_file = ScoreFile {
        num_speakers: p.matrix.num_speakers(),
        words: baseline.texts().into_iter().map(String::from).collect(),
        scores,
    };
    write_file_atomic(&m.output_dir.join("scores.txt"), write_scores(&score_file)?.as_bytes())?;
    write_file_atomic(&m.output_dir.join("corrected.txt"), write_transcript(&corrected)?.as_bytes())?;
    let report = match &m.reference {
        Some(rp) => {
            let reference = read_transcript(rp)?;
            let name = rp
                .file_stem()
                .map_or_else(|| "conversation".into(), |s| s.to_string_lossy().into_owned());
            let report = build_report(&[ScoreInput {
                name,
                reference: &reference,
                baseline: &baseline,
                hypothesis: &corrected,
            }])?;
            write_report_into(&m.output_dir, &report)?;
            Some(report)
        }
        None => None,
    };
    Ok(CorrectOutput { corrected, report })
}

#[derive(Clone, Debug)]
pub struct EvaluateArgs {
    pub corpus: PathBuf,
    pub split: String,
    pub model: Option<PathBuf>,
    pub median_frames: usize,
    pub window: WindowParams,
    pub out: PathBuf,
}

/// Corrects every conversation of a split and scores it. Writes
/// `<out>/<conv>/corrected.txt` and the report, all or nothing.
pub fn evaluate(args: &EvaluateArgs) -> Result<ScoreReport> {
    let convs = load_split(&args.corpus, &args.split)?;
    let corrector = corrector_from(args.model.as_deref())?;
    let mut corrected = Vec::with_capacity(convs.len());
    for c in &convs {
        let scores = c.scores(args.median_frames)?;
        let out = correct_transcript(&c.baseline, &scores, corrector.as_ref(), args.window)
            .context(|| c.name.clone())?;
        corrected.push(out.transcript);
    }
    let inputs: Vec<ScoreInput<'_>> = convs
        .iter()
        .zip(&corrected)
        .map(|(c, h)| ScoreInput {
            name: c.name.clone(),
            reference: &c.reference,
            baseline: &c.baseline,
            hypothesis: h,
        })
        .collect();
    let report = build_report(&inputs)?;
    let (text, toml) = report_files(&report)?;
    write_dir_atomic(&args.out, REPORT_TOML, |dir| {
        for (c, h) in convs.iter().zip(&corrected) {
            let d = dir.join(&c.name);
            std::fs::create_dir_all(&d).map_err(|e| CliError::io(&d, e))?;
            let p = d.join("corrected.txt");
            std::fs::write(&p, write_transcript(h)?).map_err(|e| CliError::io(&p, e))?;
        }
        let p = dir.join(REPORT_TEXT);
        std::fs::write(&p, &text).map_err(|e| CliError::io(&p, e))?;
        let p = dir.join(REPORT_TOML);
        std::fs::write(&p, &toml).map_err(|e| CliError::io(&p, e))
    })?;
    Ok(report)
}

pub fn experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ExperimentReport> {
    let report = run_experiment(cfg).context(|| "experiment".into())?;
    if let Some(p) = out {
        write_file_atomic(p, report.to_string().as_bytes())?;
    }
    Ok(report)
}
