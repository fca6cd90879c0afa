//! Speaker correctors: LSEC, early fusion and late fusion, plus the
//! identity corrector used as a pass-through.

mod checkpoint;
mod features;
mod model;
mod train;

use std::fmt;
use std::str::FromStr;

use aglsec_nn::ParameterStore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{load_model, model_to_bytes, save_model, MODEL_MAGIC};
pub use features::{binarize_rows, one_hot_rows, WindowFeatures, WordPosteriors, DONT_CARE, FEATURE_DIM};
pub use model::{init_from_lsec, word_loss, CorrectorConfig, FusionNet, SequenceModel};
pub use train::{train, EpochLog, PreparedWindow, TrainConfig, TrainingWindow};

use crate::error::{CoreError, Result};
use crate::tokenizer::{tokenize, Vocabulary};

/// Prefix of the LSEC parameters inside a late-fusion bundle.
pub const LATE_LSEC_PREFIX: &str = "lsec.";
pub const FUSION_PREFIX: &str = "fusion";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Identity,
    Lsec,
    EarlyFusion,
    LateFusion,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Identity, ModelKind::Lsec, ModelKind::EarlyFusion, ModelKind::LateFusion];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Identity => "identity",
            ModelKind::Lsec => "lsec",
            ModelKind::EarlyFusion => "early-fusion",
            ModelKind::LateFusion => "late-fusion",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            ModelKind::Identity => 0,
            ModelKind::Lsec => 1,
            ModelKind::EarlyFusion => 2,
            ModelKind::LateFusion => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CoreError::InvalidConfig(format!("unknown model kind `{s}`")))
    }
}

/// What a corrector sees for one two-speaker window. Speakers are local:
/// 0 is the first to appear in the baseline, 1 the other.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowInput {
    pub words: Vec<String>,
    pub baseline: Vec<usize>,
    /// Acoustic scores restricted to the two local speakers.
    pub scores: Vec<[f64; 2]>,
}

impl WindowInput {
    pub fn validate(&self) -> Result<()> {
        if self.words.is_empty() {
            return Err(CoreError::Empty("window"));
        }
        if self.baseline.len() != self.words.len() || self.scores.len() != self.words.len() {
            return Err(CoreError::LengthMismatch(format!(
                "window has {} words, {} labels, {} score rows",
                self.words.len(),
                self.baseline.len(),
                self.scores.len()
            )));
        }
        if let Some(&l) = self.baseline.iter().find(|&&l| l > 1) {
            return Err(CoreError::TooManyWindowSpeakers(l + 1));
        }
        Ok(())
    }
}

/// Anything that turns a window into per-word posteriors over its two
/// local speakers.
pub trait Corrector {
    fn correct_window(&self, window: &WindowInput) -> Result<WordPosteriors>;
}

/// Returns the baseline labels unchanged.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityCorrector;

impl Corrector for IdentityCorrector {
    fn correct_window(&self, window: &WindowInput) -> Result<WordPosteriors> {
        window.validate()?;
        Ok(WordPosteriors {
            rows: one_hot_rows(&window.baseline)?,
        })
    }
}

/// A model kind together with its configuration, vocabulary and weights.
#[derive(Clone, Debug)]
pub struct CorrectorModel {
    pub kind: ModelKind,
    pub config: CorrectorConfig,
    pub vocab: Vocabulary,
    pub params: ParameterStore,
}

impl CorrectorModel {
    /// Fresh weights drawn from a seeded generator.
    pub fn random(kind: ModelKind, config: CorrectorConfig, vocab: Vocabulary, seed: u64) -> Result<Self> {
        if config.backbone.vocab_size != vocab.len() {
            return Err(CoreError::InvalidConfig(format!(
                "config vocab size {} but vocabulary has {} tokens",
                config.backbone.vocab_size,
                vocab.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterStore::new();
        match kind {
            ModelKind::Identity => {}
            ModelKind::Lsec | ModelKind::EarlyFusion => SequenceModel::new("", &config)?.init(&mut params, &mut rng)?,
            ModelKind::LateFusion => {
                SequenceModel::new(LATE_LSEC_PREFIX, &config)?.init(&mut params, &mut rng)?;
                FusionNet::new(FUSION_PREFIX, config.fusion_hidden).init(&mut params, &mut rng)?;
            }
        }
        Ok(Self {
            kind,
            config,
            vocab,
            params,
        })
    }

    pub fn identity(vocab: Vocabulary) -> Self {
        let config = CorrectorConfig::desk(vocab.len());
        Self {
            kind: ModelKind::Identity,
            config,
            vocab,
            params: ParameterStore::new(),
        }
    }

    pub fn sequence_model(&self) -> Result<SequenceModel> {
        let prefix = if self.kind == ModelKind::LateFusion { LATE_LSEC_PREFIX } else { "" };
        SequenceModel::new(prefix, &self.config)
    }

    pub fn fusion_net(&self) -> FusionNet {
        FusionNet::new(FUSION_PREFIX, self.config.fusion_hidden)
    }

    /// Features as this model kind consumes them.
    pub fn features(&self, window: &WindowInput) -> Result<WindowFeatures> {
        let tokens = tokenize(&window.words, &self.vocab)?;
        match self.kind {
            ModelKind::EarlyFusion => WindowFeatures::from_scores(tokens, &window.scores),
            _ => WindowFeatures::from_labels(tokens, &window.baseline),
        }
    }

    /// Lexical posteriors from the LSEC part of this model.
    pub fn lexical_posteriors(&self, window: &WindowInput) -> Result<WordPosteriors> {
        let tokens = tokenize(&window.words, &self.vocab)?;
        let features = WindowFeatures::from_labels(tokens, &window.baseline)?;
        self.sequence_model()?.posteriors(&self.params, &features)
    }
}

impl Corrector for CorrectorModel {
    fn correct_window(&self, window: &WindowInput) -> Result<WordPosteriors> {
        window.validate()?;
        match self.kind {
            ModelKind::Identity => IdentityCorrector.correct_window(window),
            ModelKind::Lsec | ModelKind::EarlyFusion => {
                let features = self.features(window)?;
                self.sequence_model()?.posteriors(&self.params, &features)
            }
            ModelKind::LateFusion => {
                let lexical = self.lexical_posteriors(window)?;
                self.fusion_net().forward(&self.params, &window.scores, &lexical.rows)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::build(["how", "are", "you", "i", "am", "good", "absolutely"], 64).unwrap()
    }

    fn window() -> WindowInput {
        WindowInput {
            words: ["how", "are", "you", "absolutely", "good"].map(String::from).to_vec(),
            baseline: vec![0, 0, 0, 1, 1],
            scores: vec![[0.9, 0.1], [0.8, 0.2], [0.6, 0.4], [0.3, 0.7], [0.5, 0.5]],
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
            assert_eq!(ModelKind::from_code(k.code()), Some(k));
        }
        assert!("bogus".parse::<ModelKind>().is_err());
    }

    #[test]
    fn every_kind_yields_one_distribution_per_word() {
        let v = vocab();
        for kind in ModelKind::ALL {
            let m = CorrectorModel::random(kind, CorrectorConfig::desk(v.len()), v.clone(), 3).unwrap();
            let p = m.correct_window(&window()).unwrap();
            assert_eq!(p.len(), 5);
            for r in &p.rows {
                assert!((r[0] + r[1] - 1.0).abs() <= 1e-9);
            }
            assert_eq!(p, m.correct_window(&window()).unwrap());
        }
    }

    #[test]
    fn identity_returns_baseline() {
        let p = IdentityCorrector.correct_window(&window()).unwrap();
        assert_eq!(p.argmax(), window().baseline);
    }

    #[test]
    fn three_local_speakers_rejected() {
        let v = vocab();
        let m = CorrectorModel::random(ModelKind::Lsec, CorrectorConfig::desk(v.len()), v, 1).unwrap();
        let mut w = window();
        w.baseline[0] = 2;
        assert!(matches!(m.correct_window(&w), Err(CoreError::TooManyWindowSpeakers(3))));
    }

    #[test]
    fn lsec_init_matches_on_binarized_scores() {
        let v = vocab();
        let cfg = CorrectorConfig::desk(v.len());
        let lsec = CorrectorModel::random(ModelKind::Lsec, cfg, v.clone(), 9).unwrap();
        let early = CorrectorModel {
            kind: ModelKind::EarlyFusion,
            params: init_from_lsec(&lsec.params, &cfg).unwrap(),
            ..lsec.clone()
        };
        let mut w = window();
        w.scores = one_hot_rows(&w.baseline).unwrap();
        let a = lsec.correct_window(&w).unwrap();
        let b = early.correct_window(&w).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert!((x[0] - y[0]).abs() <= 1e-9);
        }
    }

    #[test]
    fn init_from_lsec_checks_layout() {
        let v = vocab();
        let cfg = CorrectorConfig::desk(v.len());
        let late = CorrectorModel::random(ModelKind::LateFusion, cfg, v, 1).unwrap();
        assert!(matches!(init_from_lsec(&late.params, &cfg), Err(CoreError::Shape(_))));
    }
}
