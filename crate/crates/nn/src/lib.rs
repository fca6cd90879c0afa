//! A small differentiable-computation kernel: row-major tensors, a recorded
//! tape with reverse-mode gradients, transformer encoder layers, masked
//! softmax cross-entropy, Adam, and a flat binary checkpoint format.

pub mod adam;
pub mod checkpoint;
pub mod encoder;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod params;
pub mod tape;
pub mod tensor;

pub use adam::Adam;
pub use encoder::{encoder_forward, Encoder, EncoderConfig, EncoderStack};
pub use error::{NnError, Result};
pub use layers::{Dense, EncoderLayer, FeedForward, LayerNorm, MultiHeadAttention};
pub use params::ParameterStore;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
