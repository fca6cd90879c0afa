use aglsec_nn::loss::softmax_in_place;
use aglsec_nn::{Dense, Encoder, EncoderConfig, EncoderStack, ParameterStore, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::features::{WindowFeatures, WordPosteriors, FEATURE_DIM};
use crate::error::{CoreError, Result};
use crate::tokenizer::TokenizedWindow;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CorrectorConfig {
    pub backbone: EncoderConfig,
    pub frontend_layers: usize,
    pub frontend_dim: usize,
    pub frontend_heads: usize,
    pub frontend_ff: usize,
    pub fusion_hidden: usize,
}

impl CorrectorConfig {
    /// Backbone 2×32, front-end 1×16, FusionNet hidden width 16.
    pub fn desk(vocab_size: usize) -> Self {
        Self {
            backbone: EncoderConfig::backbone(vocab_size),
            frontend_layers: 1,
            frontend_dim: 16,
            frontend_heads: 2,
            frontend_ff: 32,
            fusion_hidden: 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.backbone.validate()?;
        let frontend = EncoderConfig {
            num_layers: self.frontend_layers,
            model_dim: self.frontend_dim,
            num_heads: self.frontend_heads,
            ff_dim: self.frontend_ff,
            vocab_size: 1,
            max_positions: 1,
        };
        frontend.validate()?;
        if self.fusion_hidden == 0 {
            return Err(CoreError::InvalidConfig("fusion_hidden must be positive".into()));
        }
        Ok(())
    }
}

/// Shared LSEC / early-fusion architecture: a token backbone whose output is
/// concatenated with the per-token speaker features, projected into a small
/// front-end encoder, and classified into two local speakers per token.
#[derive(Clone, Debug)]
pub struct SequenceModel {
    backbone: Encoder,
    input: Dense,
    frontend: EncoderStack,
    head: Dense,
}

impl SequenceModel {
    /// Parameter names are all prefixed by `prefix` (may be empty).
    pub fn new(prefix: &str, config: &CorrectorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            backbone: Encoder::new(&format!("{prefix}backbone"), config.backbone, 0)?,
            input: Dense::new(
                format!("{prefix}frontend.input"),
                config.backbone.model_dim + FEATURE_DIM,
                config.frontend_dim,
            ),
            frontend: EncoderStack::new(
                &format!("{prefix}frontend"),
                config.frontend_layers,
                config.frontend_dim,
                config.frontend_heads,
                config.frontend_ff,
            ),
            head: Dense::new(format!("{prefix}head"), config.frontend_dim, 2),
        })
    }

    pub fn init<R: Rng>(&self, store: &mut ParameterStore, rng: &mut R) -> Result<()> {
        self.backbone.init(store, rng)?;
        self.input.init(store, rng)?;
        self.frontend.init(store, rng)?;
        self.head.init(store, rng)?;
        Ok(())
    }

    /// Per-token logits, `(tokens × 2)`.
    pub fn logits(&self, tape: &mut Tape, store: &ParameterStore, features: &WindowFeatures) -> Result<Var> {
        let backbone = self.backbone.forward(tape, store, &features.tokens.sub_word_ids, None)?;
        let feats = tape.leaf(features.per_token.clone());
        let joined = tape.concat_cols(&[backbone.hidden, feats])?;
        let x = self.input.forward(tape, store, joined)?;
        let hidden = self.frontend.forward(tape, store, x)?.hidden;
        Ok(self.head.forward(tape, store, hidden)?)
    }

    pub fn posteriors(&self, store: &ParameterStore, features: &WindowFeatures) -> Result<WordPosteriors> {
        let mut tape = Tape::new();
        let logits = self.logits(&mut tape, store, features)?;
        Ok(word_softmax(tape.value(logits), &features.tokens.word_boundaries))
    }

    /// Mean cross-entropy over first sub-words whose target is known.
    pub fn loss(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        features: &WindowFeatures,
        targets: &[Option<usize>],
    ) -> Result<Var> {
        let logits = self.logits(tape, store, features)?;
        word_loss(tape, logits, &features.tokens, targets)
    }
}

/// Masked cross-entropy of per-token `logits`: only each word's first
/// sub-word with a known target contributes.
pub fn word_loss(tape: &mut Tape, logits: Var, tokens: &TokenizedWindow, targets: &[Option<usize>]) -> Result<Var> {
    if targets.len() != tokens.num_words() {
        return Err(CoreError::LengthMismatch(format!(
            "{} targets for {} words",
            targets.len(),
            tokens.num_words()
        )));
    }
    let mut token_targets = vec![0; tokens.num_tokens()];
    let mut mask = vec![false; tokens.num_tokens()];
    for (&pos, target) in tokens.word_boundaries.iter().zip(targets) {
        if let Some(t) = *target {
            token_targets[pos] = t;
            mask[pos] = true;
        }
    }
    Ok(tape.masked_softmax_ce(logits, &token_targets, &mask)?)
}

fn word_softmax(logits: &Tensor, boundaries: &[usize]) -> WordPosteriors {
    WordPosteriors {
        rows: boundaries
            .iter()
            .map(|&b| {
                let mut row = [logits.get(b, 0), logits.get(b, 1)];
                softmax_in_place(&mut row);
                row
            })
            .collect(),
    }
}

/// Per-word MLP over `[acoustic_A, acoustic_B, lexical_A, lexical_B]`.
#[derive(Clone, Debug)]
pub struct FusionNet {
    hidden: Dense,
    output: Dense,
}

impl FusionNet {
    pub fn new(prefix: &str, hidden: usize) -> Self {
        Self {
            hidden: Dense::new(format!("{prefix}.hidden"), 4, hidden),
            output: Dense::new(format!("{prefix}.output"), hidden, 2),
        }
    }

    pub fn init<R: Rng>(&self, store: &mut ParameterStore, rng: &mut R) -> Result<()> {
        self.hidden.init(store, rng)?;
        self.output.init(store, rng)?;
        Ok(())
    }

    pub fn inputs(acoustic: &[[f64; 2]], lexical: &[[f64; 2]]) -> Result<Tensor> {
        if acoustic.len() != lexical.len() {
            return Err(CoreError::LengthMismatch(format!(
                "{} acoustic rows vs {} lexical rows",
                acoustic.len(),
                lexical.len()
            )));
        }
        if acoustic.is_empty() {
            return Err(CoreError::Empty("fusion inputs"));
        }
        let data = acoustic
            .iter()
            .zip(lexical)
            .flat_map(|(a, l)| [a[0], a[1], l[0], l[1]])
            .collect();
        Ok(Tensor::matrix(acoustic.len(), 4, data)?)
    }

    pub fn logits(&self, tape: &mut Tape, store: &ParameterStore, inputs: &Tensor) -> Result<Var> {
        let x = tape.leaf(inputs.clone());
        let h = self.hidden.forward(tape, store, x)?;
        let h = tape.tanh(h)?;
        Ok(self.output.forward(tape, store, h)?)
    }

    pub fn loss(&self, tape: &mut Tape, store: &ParameterStore, inputs: &Tensor, targets: &[Option<usize>]) -> Result<Var> {
        if targets.len() != inputs.rows() {
            return Err(CoreError::LengthMismatch(format!(
                "{} targets for {} fusion rows",
                targets.len(),
                inputs.rows()
            )));
        }
        let mask: Vec<bool> = targets.iter().map(Option::is_some).collect();
        let t: Vec<usize> = targets.iter().map(|t| t.unwrap_or(0)).collect();
        let logits = self.logits(tape, store, inputs)?;
        Ok(tape.masked_softmax_ce(logits, &t, &mask)?)
    }

    pub fn forward(&self, store: &ParameterStore, acoustic: &[[f64; 2]], lexical: &[[f64; 2]]) -> Result<WordPosteriors> {
        let inputs = Self::inputs(acoustic, lexical)?;
        let mut tape = Tape::new();
        let logits = self.logits(&mut tape, store, &inputs)?;
        let boundaries: Vec<usize> = (0..acoustic.len()).collect();
        Ok(word_softmax(tape.value(logits), &boundaries))
    }
}

/// Copies trained LSEC weights into an early-fusion parameter store. Both
/// models share one architecture; score features take the slots the one-hot
/// labels used.
pub fn init_from_lsec(lsec_params: &ParameterStore, config: &CorrectorConfig) -> Result<ParameterStore> {
    let mut template = ParameterStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    SequenceModel::new("", config)?.init(&mut template, &mut rng)?;
    if !template.same_layout(lsec_params) {
        return Err(CoreError::Shape(
            "LSEC parameters do not match the early-fusion architecture".into(),
        ));
    }
    let mut out = lsec_params.clone();
    out.zero_grad();
    Ok(out)
}
