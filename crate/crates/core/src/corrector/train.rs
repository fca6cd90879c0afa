use aglsec_nn::{Adam, ParameterStore, Tape, Tensor, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::WindowFeatures;
use super::model::{init_from_lsec, FusionNet};
use super::{Corrector, CorrectorConfig, CorrectorModel, ModelKind, WindowInput, LATE_LSEC_PREFIX};
use crate::error::{CoreError, Result};
use crate::tokenizer::{tokenize, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 8,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(CoreError::InvalidConfig("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(CoreError::InvalidConfig(format!("learning rate {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// A window with ground-truth local labels. `None` marks words whose true
/// speaker is neither of the window's two speakers; they carry no loss.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingWindow {
    pub input: WindowInput,
    pub targets: Vec<Option<usize>>,
}

impl TrainingWindow {
    pub fn validate(&self) -> Result<()> {
        self.input.validate()?;
        if self.targets.len() != self.input.words.len() {
            return Err(CoreError::LengthMismatch(format!(
                "{} targets for {} words",
                self.targets.len(),
                self.input.words.len()
            )));
        }
        if let Some(t) = self.targets.iter().flatten().find(|&&t| t > 1) {
            return Err(CoreError::TooManyWindowSpeakers(t + 1));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
}

/// Tokenized features and targets, computed once before training.
#[derive(Clone, Debug)]
pub struct PreparedWindow {
    pub features: WindowFeatures,
    pub targets: Vec<Option<usize>>,
}

fn prepare(kind: ModelKind, vocab: &Vocabulary, windows: &[TrainingWindow]) -> Result<Vec<PreparedWindow>> {
    let mut out = Vec::with_capacity(windows.len());
    for w in windows {
        w.validate()?;
        if w.targets.iter().all(Option::is_none) {
            continue;
        }
        let tokens = tokenize(&w.input.words, vocab)?;
        let features = match kind {
            ModelKind::EarlyFusion => WindowFeatures::from_scores(tokens, &w.input.scores)?,
            _ => WindowFeatures::from_labels(tokens, &w.input.baseline)?,
        };
        out.push(PreparedWindow {
            features,
            targets: w.targets.clone(),
        });
    }
    if out.is_empty() {
        return Err(CoreError::Empty("training corpus"));
    }
    Ok(out)
}

/// Mini-batch Adam over `n` items in a seeded shuffled order. Each item's
/// loss is averaged into the batch gradient.
fn run_epochs<F>(n: usize, tc: &TrainConfig, params: &mut ParameterStore, mut item_loss: F) -> Result<Vec<EpochLog>>
where
    F: FnMut(&mut Tape, &ParameterStore, usize) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    rng.set_stream(1);
    let mut adam = Adam::new(tc.learning_rate);
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = Vec::with_capacity(tc.epochs);
    for epoch in 0..tc.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(tc.batch_size) {
            params.zero_grad();
            for &i in batch {
                let mut tape = Tape::new();
                let loss = item_loss(&mut tape, params, i)?;
                total += tape.value(loss).data()[0];
                tape.backward_into(loss, params)?;
            }
            params.scale_grads(1.0 / batch.len() as f64);
            adam.step(params)?;
        }
        log.push(EpochLog {
            epoch,
            mean_loss: total / n as f64,
        });
    }
    params.zero_grad();
    Ok(log)
}

/// Trains a corrector of `kind` on `windows`.
///
/// * LSEC starts from random weights, or continues from `init` if given.
/// * Early fusion starts from random weights, or from an LSEC model's
///   weights when `init` is one.
/// * Late fusion requires a trained LSEC `init`; it stays frozen and only
///   the FusionNet is trained.
pub fn train(
    kind: ModelKind,
    config: CorrectorConfig,
    vocab: &Vocabulary,
    windows: &[TrainingWindow],
    tc: &TrainConfig,
    init: Option<&CorrectorModel>,
) -> Result<(CorrectorModel, Vec<EpochLog>)> {
    tc.validate()?;
    if let Some(m) = init {
        if m.vocab != *vocab || m.config != config {
            return Err(CoreError::InvalidConfig("initial model uses a different vocabulary or configuration".into()));
        }
    }
    let mut model = CorrectorModel::random(kind, config, vocab.clone(), tc.seed)?;
    match (kind, init) {
        (ModelKind::Identity, _) => {
            return Err(CoreError::InvalidConfig("the identity corrector has nothing to train".into()));
        }
        (ModelKind::Lsec, Some(m)) if m.kind == ModelKind::Lsec => model.params = m.params.clone(),
        (ModelKind::EarlyFusion, Some(m)) if m.kind == ModelKind::Lsec => {
            model.params = init_from_lsec(&m.params, &config)?;
        }
        (ModelKind::Lsec | ModelKind::EarlyFusion, None) => {}
        (ModelKind::LateFusion, Some(m)) if m.kind == ModelKind::Lsec => {
            return train_late_fusion(m, windows, tc);
        }
        (_, other) => {
            return Err(CoreError::InvalidConfig(format!(
                "cannot initialize {kind} from {}",
                other.map_or("nothing".to_string(), |m| m.kind.to_string())
            )));
        }
    }
    let prepared = prepare(kind, vocab, windows)?;
    let net = model.sequence_model()?;
    let log = run_epochs(prepared.len(), tc, &mut model.params, |tape, store, i| {
        net.loss(tape, store, &prepared[i].features, &prepared[i].targets)
    })?;
    Ok((model, log))
}

fn train_late_fusion(
    lsec: &CorrectorModel,
    windows: &[TrainingWindow],
    tc: &TrainConfig,
) -> Result<(CorrectorModel, Vec<EpochLog>)> {
    let mut model = CorrectorModel::random(ModelKind::LateFusion, lsec.config, lsec.vocab.clone(), tc.seed)?;
    let fusion = model.fusion_net();
    let mut fusion_params = ParameterStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    fusion.init(&mut fusion_params, &mut rng)?;

    let mut rows: Vec<(Tensor, Vec<Option<usize>>)> = Vec::with_capacity(windows.len());
    for w in windows {
        w.validate()?;
        if w.targets.iter().all(Option::is_none) {
            continue;
        }
        let lexical = lsec.correct_window(&w.input)?;
        rows.push((FusionNet::inputs(&w.input.scores, &lexical.rows)?, w.targets.clone()));
    }
    if rows.is_empty() {
        return Err(CoreError::Empty("training corpus"));
    }
    let log = run_epochs(rows.len(), tc, &mut fusion_params, |tape, store, i| {
        fusion.loss(tape, store, &rows[i].0, &rows[i].1)
    })?;

    let mut params = ParameterStore::new();
    params.absorb_prefixed(LATE_LSEC_PREFIX, &lsec.params)?;
    params.absorb_prefixed("", &fusion_params)?;
    if !params.same_layout(&model.params) {
        return Err(CoreError::Shape("late-fusion bundle layout".into()));
    }
    model.params = params;
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use aglsec_nn::checkpoint::params_to_bytes;

    fn corpus() -> (Vocabulary, Vec<TrainingWindow>) {
        let words: Vec<String> = ["how", "are", "you", "i", "am", "good"].map(String::from).to_vec();
        let vocab = Vocabulary::build(words.iter().map(String::as_str), 32).unwrap();
        let w = TrainingWindow {
            input: WindowInput {
                words,
                baseline: vec![0, 0, 0, 0, 0, 1],
                scores: vec![[0.9, 0.1], [0.8, 0.2], [0.7, 0.3], [0.2, 0.8], [0.3, 0.7], [0.1, 0.9]],
            },
            targets: vec![Some(0), Some(0), Some(0), Some(1), Some(1), Some(1)],
        };
        (vocab, vec![w])
    }

    fn tiny(vocab: &Vocabulary) -> CorrectorConfig {
        let mut c = CorrectorConfig::desk(vocab.len());
        c.backbone.model_dim = 8;
        c.backbone.ff_dim = 16;
        c.frontend_dim = 8;
        c.frontend_ff = 16;
        c
    }

    #[test]
    fn overfits_a_single_window() {
        let (vocab, windows) = corpus();
        let tc = TrainConfig {
            epochs: 200,
            batch_size: 1,
            learning_rate: 1e-2,
            seed: 4,
        };
        let (model, log) = train(ModelKind::Lsec, CorrectorConfig::desk(vocab.len()), &vocab, &windows, &tc, None).unwrap();
        assert!(log.last().unwrap().mean_loss < log[0].mean_loss);
        // Loss after the final update.
        let mut tape = Tape::new();
        let f = model.features(&windows[0].input).unwrap();
        let l = model.sequence_model().unwrap().loss(&mut tape, &model.params, &f, &windows[0].targets).unwrap();
        assert!(tape.value(l).data()[0] < 0.05, "{}", tape.value(l).data()[0]);
    }

    #[test]
    fn training_is_deterministic() {
        let (vocab, windows) = corpus();
        let tc = TrainConfig {
            epochs: 3,
            batch_size: 2,
            learning_rate: 1e-3,
            seed: 11,
        };
        let cfg = tiny(&vocab);
        let a = train(ModelKind::EarlyFusion, cfg, &vocab, &windows, &tc, None).unwrap().0;
        let b = train(ModelKind::EarlyFusion, cfg, &vocab, &windows, &tc, None).unwrap().0;
        assert_eq!(params_to_bytes(&a.params), params_to_bytes(&b.params));
    }

    #[test]
    fn late_fusion_needs_lsec() {
        let (vocab, windows) = corpus();
        let tc = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let cfg = tiny(&vocab);
        assert!(train(ModelKind::LateFusion, cfg, &vocab, &windows, &tc, None).is_err());
        let lsec = train(ModelKind::Lsec, cfg, &vocab, &windows, &tc, None).unwrap().0;
        let (late, _) = train(ModelKind::LateFusion, cfg, &vocab, &windows, &tc, Some(&lsec)).unwrap();
        // The LSEC half is frozen.
        assert_eq!(
            params_to_bytes(&late.params.extract_prefix(LATE_LSEC_PREFIX)),
            params_to_bytes(&lsec.params)
        );
        assert!(train(ModelKind::Identity, cfg, &vocab, &windows, &tc, None).is_err());
    }

    #[test]
    fn out_of_pair_targets_are_masked_and_bad_labels_rejected() {
        let (vocab, mut windows) = corpus();
        let tc = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        windows[0].targets[2] = None;
        assert!(train(ModelKind::Lsec, tiny(&vocab), &vocab, &windows, &tc, None).is_ok());
        windows[0].targets[2] = Some(2);
        assert!(matches!(
            train(ModelKind::Lsec, tiny(&vocab), &vocab, &windows, &tc, None),
            Err(CoreError::TooManyWindowSpeakers(3))
        ));
    }
}
