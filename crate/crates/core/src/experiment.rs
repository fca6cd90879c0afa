//! End-to-end synthetic experiment: simulate a corpus, train every model
//! kind on the training split and score them on the test split.

use std::fmt;

use crate::corrector::{train, Corrector, CorrectorConfig, CorrectorModel, ModelKind, TrainConfig, TrainingWindow};
use crate::error::{CoreError, Result};
use crate::scores::{SpeakerScoreVector, DEFAULT_MEDIAN_FRAMES};
use crate::scoring::{error_accounting, wder_transcripts, ErrorAccounting, WderBreakdown};
use crate::synth::{corpus, Corpus, SimulatedConversation, SimulatorConfig};
use crate::tokenizer::Vocabulary;
use crate::windowing::{correct_transcript, WindowParams};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub simulator: SimulatorConfig,
    pub num_conversations: usize,
    pub window: WindowParams,
    pub median_frames: usize,
    pub max_vocab: usize,
    pub train: TrainConfig,
    /// The data-efficiency comparison trains on 1/`small_fraction` of the
    /// training conversations.
    pub small_fraction: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            simulator: SimulatorConfig::default(),
            num_conversations: 2000,
            window: WindowParams::default(),
            median_frames: DEFAULT_MEDIAN_FRAMES,
            max_vocab: 512,
            train: TrainConfig {
                epochs: 12,
                ..TrainConfig::default()
            },
            small_fraction: 8,
        }
    }
}

/// Test-split results of one system.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemResult {
    pub name: String,
    pub wder: WderBreakdown,
    pub accounting: ErrorAccounting,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub seed: u64,
    pub train_windows: usize,
    pub small_train_windows: usize,
    pub test_words: usize,
    pub baseline: SystemResult,
    pub lsec: SystemResult,
    pub early_fusion: SystemResult,
    pub late_fusion: SystemResult,
    /// Early fusion on the reduced training set, from the LSEC weights.
    pub small_from_lsec: SystemResult,
    /// Early fusion on the reduced training set, from random weights.
    pub small_from_random: SystemResult,
    pub models: TrainedModels,
}

#[derive(Clone, Debug)]
pub struct TrainedModels {
    pub lsec: CorrectorModel,
    pub early_fusion: CorrectorModel,
    pub late_fusion: CorrectorModel,
    pub small_from_lsec: CorrectorModel,
    pub small_from_random: CorrectorModel,
}

impl ExperimentReport {
    pub fn systems(&self) -> [&SystemResult; 6] {
        [
            &self.baseline,
            &self.lsec,
            &self.late_fusion,
            &self.early_fusion,
            &self.small_from_random,
            &self.small_from_lsec,
        ]
    }

    /// Relative WDER reduction of `system` over `reference`, in percent.
    pub fn relative_reduction(system: &SystemResult, reference: &SystemResult) -> f64 {
        if reference.wder.wder == 0.0 {
            0.0
        } else {
            100.0 * (reference.wder.wder - system.wder.wder) / reference.wder.wder
        }
    }
}

impl fmt::Display for ExperimentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "seed {}: {} training windows ({} reduced), {} test words",
            self.seed, self.train_windows, self.small_train_windows, self.test_words
        )?;
        writeln!(
            f,
            "{:<24} {:>8} {:>7} {:>7} {:>7} {:>9} {:>11}",
            "system", "wder%", "errors", "fixed", "broken", "corr%", "introd%"
        )?;
        for s in self.systems() {
            writeln!(
                f,
                "{:<24} {:>8.3} {:>7} {:>7} {:>7} {:>9.2} {:>11.2}",
                s.name,
                100.0 * s.wder.wder,
                s.accounting.corrected_errors,
                s.accounting.fixed,
                s.accounting.broken,
                s.accounting.corrected_pct,
                s.accounting.introduced_pct
            )?;
        }
        Ok(())
    }
}

fn conversation_scores(conv: &SimulatedConversation, median: usize) -> Result<Vec<SpeakerScoreVector>> {
    conv.word_scores(median)
}

fn windows_of(convs: &[SimulatedConversation], cfg: &ExperimentConfig) -> Result<Vec<TrainingWindow>> {
    let mut out = Vec::new();
    for c in convs {
        let scores = conversation_scores(c, cfg.median_frames)?;
        out.extend(c.training_windows(cfg.window, &scores)?);
    }
    Ok(out)
}

/// Scores `corrector` on `convs` against their references.
pub fn evaluate(
    name: &str,
    corrector: &dyn Corrector,
    convs: &[SimulatedConversation],
    window: WindowParams,
    median_frames: usize,
) -> Result<SystemResult> {
    let mut wders = Vec::with_capacity(convs.len());
    let mut accounts = Vec::with_capacity(convs.len());
    for c in convs {
        let scores = conversation_scores(c, median_frames)?;
        let corrected = correct_transcript(&c.baseline, &scores, corrector, window)?;
        wders.push(wder_transcripts(&c.reference, &corrected.transcript)?);
        accounts.push(error_accounting(&c.baseline, &corrected.transcript, &c.reference)?);
    }
    Ok(SystemResult {
        name: name.to_string(),
        wder: WderBreakdown::aggregate(&wders)?,
        accounting: ErrorAccounting::aggregate(&accounts),
    })
}

pub fn corpus_vocabulary(corpus: &Corpus, max_size: usize) -> Result<Vocabulary> {
    let words: Vec<&str> = corpus
        .train
        .iter()
        .flat_map(|c| c.reference.words.iter().map(|w| w.text.as_str()))
        .collect();
    Vocabulary::build(words, max_size)
}

/// Runs the whole comparison for one corpus seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.small_fraction == 0 {
        return Err(CoreError::InvalidConfig("small_fraction must be positive".into()));
    }
    cfg.window.validate()?;
    let data = corpus(&cfg.simulator, cfg.num_conversations)?;
    let vocab = corpus_vocabulary(&data, cfg.max_vocab)?;
    let model_config = CorrectorConfig::desk(vocab.len());

    let windows = windows_of(&data.train, cfg)?;
    let small_count = data.train.len().div_ceil(cfg.small_fraction);
    let small = windows_of(&data.train[..small_count], cfg)?;

    let tc = cfg.train;
    let (lsec, _) = train(ModelKind::Lsec, model_config, &vocab, &windows, &tc, None)?;
    let (early, _) = train(ModelKind::EarlyFusion, model_config, &vocab, &windows, &tc, Some(&lsec))?;
    let (late, _) = train(ModelKind::LateFusion, model_config, &vocab, &windows, &tc, Some(&lsec))?;
    let (small_lsec, _) = train(ModelKind::EarlyFusion, model_config, &vocab, &small, &tc, Some(&lsec))?;
    let (small_random, _) = train(ModelKind::EarlyFusion, model_config, &vocab, &small, &tc, None)?;

    let eval = |name: &str, c: &dyn Corrector| evaluate(name, c, &data.test, cfg.window, cfg.median_frames);
    let identity = CorrectorModel::identity(vocab.clone());
    Ok(ExperimentReport {
        seed: cfg.simulator.seed,
        train_windows: windows.len(),
        small_train_windows: small.len(),
        test_words: data.test.iter().map(|c| c.reference.len()).sum(),
        baseline: eval("baseline", &identity)?,
        lsec: eval("lsec", &lsec)?,
        early_fusion: eval("early-fusion", &early)?,
        late_fusion: eval("late-fusion", &late)?,
        small_from_lsec: eval("small early-fusion/lsec", &small_lsec)?,
        small_from_random: eval("small early-fusion/rand", &small_random)?,
        models: TrainedModels {
            lsec,
            early_fusion: early,
            late_fusion: late,
            small_from_lsec: small_lsec,
            small_from_random: small_random,
        },
    })
}
