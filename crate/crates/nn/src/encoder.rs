use rand::Rng;

use crate::error::{NnError, Result};
use crate::layers::{Dense, EncoderLayer};
use crate::params::ParameterStore;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncoderConfig {
    pub num_layers: usize,
    pub model_dim: usize,
    pub num_heads: usize,
    pub ff_dim: usize,
    pub vocab_size: usize,
    pub max_positions: usize,
}

impl EncoderConfig {
    /// Backbone defaults: 2 layers, width 32, 2 heads, FF 64.
    pub fn backbone(vocab_size: usize) -> Self {
        Self {
            num_layers: 2,
            model_dim: 32,
            num_heads: 2,
            ff_dim: 64,
            vocab_size,
            max_positions: 128,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_layers", self.num_layers),
            ("model_dim", self.model_dim),
            ("num_heads", self.num_heads),
            ("ff_dim", self.ff_dim),
            ("vocab_size", self.vocab_size),
            ("max_positions", self.max_positions),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(NnError::InvalidConfig(format!("{name} must be positive")));
        }
        if !self.model_dim.is_multiple_of(self.num_heads) {
            return Err(NnError::InvalidConfig(format!(
                "model_dim {} not divisible by num_heads {}",
                self.model_dim, self.num_heads
            )));
        }
        Ok(())
    }
}

/// Stack of encoder layers over real-valued inputs of width `dim`.
#[derive(Clone, Debug)]
pub struct EncoderStack {
    pub layers: Vec<EncoderLayer>,
}

pub struct StackOutput {
    pub hidden: Var,
    /// Attention matrices, layer-major then head.
    pub attention: Vec<Var>,
}

impl EncoderStack {
    pub fn new(prefix: &str, num_layers: usize, dim: usize, num_heads: usize, ff_dim: usize) -> Self {
        let layers = (0..num_layers)
            .map(|i| EncoderLayer::new(&format!("{prefix}.layer{i}"), dim, num_heads, ff_dim))
            .collect();
        Self { layers }
    }

    pub fn init<R: Rng>(&self, store: &mut ParameterStore, rng: &mut R) -> Result<()> {
        for layer in &self.layers {
            layer.init(store, rng)?;
        }
        Ok(())
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParameterStore, x: Var) -> Result<StackOutput> {
        let mut hidden = x;
        let mut attention = Vec::new();
        for layer in &self.layers {
            let out = layer.forward(tape, store, hidden)?;
            hidden = out.output;
            attention.extend(out.weights);
        }
        Ok(StackOutput { hidden, attention })
    }
}

/// Token encoder: learned token and position embeddings, optional per-token
/// extra features concatenated and projected back to `model_dim`, then the
/// layer stack.
#[derive(Clone, Debug)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub prefix: String,
    pub extra_dim: usize,
    input_proj: Option<Dense>,
    stack: EncoderStack,
}

impl Encoder {
    pub fn new(prefix: &str, config: EncoderConfig, extra_dim: usize) -> Result<Self> {
        config.validate()?;
        let input_proj =
            (extra_dim > 0).then(|| Dense::new(format!("{prefix}.input_proj"), config.model_dim + extra_dim, config.model_dim));
        Ok(Self {
            config,
            prefix: prefix.to_string(),
            extra_dim,
            input_proj,
            stack: EncoderStack::new(prefix, config.num_layers, config.model_dim, config.num_heads, config.ff_dim),
        })
    }

    fn token_embedding(&self) -> String {
        format!("{}.token_embedding", self.prefix)
    }

    fn position_embedding(&self) -> String {
        format!("{}.position_embedding", self.prefix)
    }

    pub fn init<R: Rng>(&self, store: &mut ParameterStore, rng: &mut R) -> Result<()> {
        let c = &self.config;
        store.insert_uniform(&self.token_embedding(), &[c.vocab_size, c.model_dim], rng)?;
        store.insert_uniform(&self.position_embedding(), &[c.max_positions, c.model_dim], rng)?;
        if let Some(p) = &self.input_proj {
            p.init(store, rng)?;
        }
        self.stack.init(store, rng)
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        token_ids: &[usize],
        extra: Option<Var>,
    ) -> Result<StackOutput> {
        let c = &self.config;
        if token_ids.len() > c.max_positions {
            return Err(NnError::SequenceTooLong {
                len: token_ids.len(),
                max: c.max_positions,
            });
        }
        if let Some(&id) = token_ids.iter().find(|&&id| id >= c.vocab_size) {
            return Err(NnError::TokenOutOfRange { id, vocab: c.vocab_size });
        }
        let tok_table = tape.param(store, &self.token_embedding())?;
        let pos_table = tape.param(store, &self.position_embedding())?;
        let tok = tape.gather(tok_table, token_ids)?;
        let positions: Vec<usize> = (0..token_ids.len()).collect();
        let pos = tape.gather(pos_table, &positions)?;
        let mut x = tape.add(tok, pos)?;
        match (&self.input_proj, extra) {
            (Some(proj), Some(features)) => {
                let width = tape.value(features).cols();
                if width != self.extra_dim {
                    return Err(NnError::ShapeMismatch {
                        op: "encoder extra features",
                        expected: vec![token_ids.len(), self.extra_dim],
                        got: tape.value(features).shape().to_vec(),
                    });
                }
                let joined = tape.concat_cols(&[x, features])?;
                x = proj.forward(tape, store, joined)?;
            }
            (None, None) => {}
            (Some(_), None) => {
                return Err(NnError::InvalidConfig("encoder expects extra features".into()));
            }
            (None, Some(_)) => {
                return Err(NnError::InvalidConfig("encoder takes no extra features".into()));
            }
        }
        self.stack.forward(tape, store, x)
    }
}

/// Runs the encoder on a fresh tape and returns the `(length × model_dim)`
/// contextual embeddings.
pub fn encoder_forward(
    encoder: &Encoder,
    params: &ParameterStore,
    token_ids: &[usize],
    extra_features: Option<&Tensor>,
) -> Result<Tensor> {
    let mut tape = Tape::new();
    let extra = extra_features.map(|f| tape.leaf(f.clone()));
    let out = encoder.forward(&mut tape, params, token_ids, extra)?;
    Ok(tape.value(out.hidden).clone())
}
