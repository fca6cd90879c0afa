//! Parameterized building blocks. Each layer owns only its parameter names
//! and dimensions; values live in a [`ParameterStore`].

use rand::Rng;

use crate::error::Result;
use crate::params::ParameterStore;
use crate::tape::{Tape, Var};

#[derive(Clone, Debug)]
pub struct Dense {
    pub prefix: String,
    pub input: usize,
    pub output: usize,
}

impl Dense {
    pub fn new(prefix: impl Into<String>, input: usize, output: usize) -> Self {
        Self {
            prefix: prefix.into(),
            input,
            output,
        }
    }

    pub fn weight_name(&self) -> String {
        format!("{}.weight", self.prefix)
    }

    pub fn bias_name(&self) -> String {
        format!("{}.bias", self.prefix)
    }

    pub fn init<R: Rng>(&self, store: &mut ParameterStore, rng: &mut R) -> Result<()> {
        store.insert_uniform(&self.weight_name(), &[self.input, self.output], rng)?;
        store.insert_filled(&self.bias_name(), &[self.output], 0.0)
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParameterStore, x: Var) -> Result<Var> {
        let w = tape.param(store, &self.weight_name())?;
        let b = tape.param(store, &self.bias_name())?;
        let y = tape.matmul(x, w)?;
        tape.add_bias(y, b)
    }
}

#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub prefix: String,
    pub dim: usize,
}

impl LayerNorm {
    pub fn new(prefix: impl Into<String>, dim: usize) -> Self {
        Self {
            prefix: prefix.into(),
            dim,
        }
    }

    pub fn init(&self, store: &mut ParameterStore) -> Result<()> {
        store.insert_filled(&format!("{}.gamma", self.prefix), &[self.dim], 1.0)?;
        store.insert_filled(&format!("{}.beta", self.prefix), &[self.dim], 0.0)
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParameterStore, x: Var) -> Result<Var> {
        let g = tape.param(store, &format!("{}.gamma", self.prefix))?;
        let b = tape.param(store, &format!("{}.beta", self.prefix))?;
        tape.layer_norm(x, g, b)
    }
}

/// Multi-head scaled dot-product self-attention without masking.
#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub query: Dense,
    pub key: Dense,
    pub value: Dense,
    pub output: Dense,
    pub num_heads: usize,
    pub dim: usize,
}

pub struct AttentionOutput {
    pub output: Var,
    /// Row-stochastic attention matrix of each head.
    pub weights: Vec<Var>,
}

impl MultiHeadAttention {
    pub fn new(prefix: &str, dim: usize, num_heads: usize) -> Self {
        Self {
            query: Dense::new(format!("{prefix}.query"), dim, dim),
            key: Dense::new(format!("{prefix}.key"), dim, dim),
            value: Dense::new(format!("{prefix}.value"), dim, dim),
            output: Dense::new(format!("{prefix}.output"), dim, dim),
            num_heads,
            dim,
        }
    }

    pub fn init<R: Rng>(&self, store: &mut ParameterStore, rng: &mut R) -> Result<()> {
        self.query.init(store, rng)?;
        self.key.init(store, rng)?;
        self.value.init(store, rng)?;
        self.output.init(store, rng)
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParameterStore, x: Var) -> Result<AttentionOutput> {
        let q = self.query.forward(tape, store, x)?;
        let k = self.key.forward(tape, store, x)?;
        let v = self.value.forward(tape, store, x)?;
        let head_dim = self.dim / self.num_heads;
        let scale = 1.0 / (head_dim as f64).sqrt();
        let mut heads = Vec::with_capacity(self.num_heads);
        let mut weights = Vec::with_capacity(self.num_heads);
        for h in 0..self.num_heads {
            let start = h * head_dim;
            let qh = tape.slice_cols(q, start, head_dim)?;
            let kh = tape.slice_cols(k, start, head_dim)?;
            let vh = tape.slice_cols(v, start, head_dim)?;
            let scores = tape.matmul_bt(qh, kh)?;
            let scores = tape.scale(scores, scale)?;
            let attn = tape.softmax_rows(scores)?;
            weights.push(attn);
            heads.push(tape.matmul(attn, vh)?);
        }
        let merged = if heads.len() == 1 {
            heads[0]
        } else {
            tape.concat_cols(&heads)?
        };
        let output = self.output.forward(tape, store, merged)?;
        Ok(AttentionOutput { output, weights })
    }
}

#[derive(Clone, Debug)]
pub struct FeedForward {
    pub inner: Dense,
    pub outer: Dense,
}

impl FeedForward {
    pub fn new(prefix: &str, dim: usize, hidden: usize) -> Self {
        Self {
            inner: Dense::new(format!("{prefix}.inner"), dim, hidden),
            outer: Dense::new(format!("{prefix}.outer"), hidden, dim),
        }
    }

    pub fn init<R: Rng>(&self, store: &mut ParameterStore, rng: &mut R) -> Result<()> {
        self.inner.init(store, rng)?;
        self.outer.init(store, rng)
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParameterStore, x: Var) -> Result<Var> {
        let h = self.inner.forward(tape, store, x)?;
        let h = tape.gelu(h)?;
        self.outer.forward(tape, store, h)
    }
}

/// Post-norm transformer encoder layer:
/// `h = LN(x + Attn(x))`, `y = LN(h + FF(h))`.
#[derive(Clone, Debug)]
pub struct EncoderLayer {
    pub attention: MultiHeadAttention,
    pub attention_norm: LayerNorm,
    pub feed_forward: FeedForward,
    pub output_norm: LayerNorm,
}

impl EncoderLayer {
    pub fn new(prefix: &str, dim: usize, num_heads: usize, ff_dim: usize) -> Self {
        Self {
            attention: MultiHeadAttention::new(&format!("{prefix}.attention"), dim, num_heads),
            attention_norm: LayerNorm::new(format!("{prefix}.attention_norm"), dim),
            feed_forward: FeedForward::new(&format!("{prefix}.feed_forward"), dim, ff_dim),
            output_norm: LayerNorm::new(format!("{prefix}.output_norm"), dim),
        }
    }

    pub fn init<R: Rng>(&self, store: &mut ParameterStore, rng: &mut R) -> Result<()> {
        self.attention.init(store, rng)?;
        self.attention_norm.init(store)?;
        self.feed_forward.init(store, rng)?;
        self.output_norm.init(store)
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParameterStore, x: Var) -> Result<AttentionOutput> {
        let attn = self.attention.forward(tape, store, x)?;
        let h = tape.add(x, attn.output)?;
        let h = self.attention_norm.forward(tape, store, h)?;
        let f = self.feed_forward.forward(tape, store, h)?;
        let y = tape.add(h, f)?;
        let output = self.output_norm.forward(tape, store, y)?;
        Ok(AttentionOutput {
            output,
            weights: attn.weights,
        })
    }
}
