//! Model checkpoints: a short header (kind, configuration, vocabulary)
//! followed by the kernel's parameter format.
//!
//! ```text
//! magic    4 bytes "AGLM"
//! version  u32
//! kind     u8
//! config   u32 × 11 (backbone: layers, dim, heads, ff, vocab, positions;
//!                    front-end: layers, dim, heads, ff; fusion hidden)
//! vocab    u32 count, then per token u32 length + UTF-8 bytes
//! params   kernel checkpoint ("AGLS" ...) until EOF
//! ```

use std::io::{Read, Write};

use aglsec_nn::checkpoint::{read_params, write_params};
use aglsec_nn::EncoderConfig;

use super::{CorrectorConfig, CorrectorModel, ModelKind};
use crate::error::{CoreError, Result};
use crate::tokenizer::Vocabulary;

pub const MODEL_MAGIC: &[u8; 4] = b"AGLM";
const VERSION: u32 = 1;
const MAX_TOKEN_BYTES: usize = 1 << 12;

fn put_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| CoreError::BadCheckpoint(format!("value {v} exceeds u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn truncated(e: std::io::Error) -> CoreError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        CoreError::BadCheckpoint("truncated header".into())
    } else {
        CoreError::Io(e)
    }
}

fn get_u32<R: Read>(r: &mut R) -> Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b) as usize)
}

pub fn save_model<W: Write>(mut w: W, model: &CorrectorModel) -> Result<()> {
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[model.kind.code()])?;
    let c = &model.config;
    let b = &c.backbone;
    for v in [
        b.num_layers,
        b.model_dim,
        b.num_heads,
        b.ff_dim,
        b.vocab_size,
        b.max_positions,
        c.frontend_layers,
        c.frontend_dim,
        c.frontend_heads,
        c.frontend_ff,
        c.fusion_hidden,
    ] {
        put_u32(&mut w, v)?;
    }
    put_u32(&mut w, model.vocab.len())?;
    for t in model.vocab.tokens() {
        put_u32(&mut w, t.len())?;
        w.write_all(t.as_bytes())?;
    }
    write_params(&mut w, &model.params)?;
    Ok(())
}

pub fn model_to_bytes(model: &CorrectorModel) -> Vec<u8> {
    let mut buf = Vec::new();
    save_model(&mut buf, model).expect("writing to a Vec cannot fail");
    buf
}

pub fn load_model<R: Read>(mut r: R) -> Result<CorrectorModel> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MODEL_MAGIC {
        return Err(CoreError::BadCheckpoint(format!("bad magic {magic:?}")));
    }
    let version = get_u32(&mut r)?;
    if version != VERSION as usize {
        return Err(CoreError::BadCheckpoint(format!("unsupported version {version}")));
    }
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind).map_err(truncated)?;
    let kind = ModelKind::from_code(kind[0])
        .ok_or_else(|| CoreError::BadCheckpoint(format!("unknown model kind code {}", kind[0])))?;
    let mut f = [0usize; 11];
    for v in &mut f {
        *v = get_u32(&mut r)?;
    }
    let config = CorrectorConfig {
        backbone: EncoderConfig {
            num_layers: f[0],
            model_dim: f[1],
            num_heads: f[2],
            ff_dim: f[3],
            vocab_size: f[4],
            max_positions: f[5],
        },
        frontend_layers: f[6],
        frontend_dim: f[7],
        frontend_heads: f[8],
        frontend_ff: f[9],
        fusion_hidden: f[10],
    };
    config
        .validate()
        .map_err(|e| CoreError::BadCheckpoint(format!("invalid configuration: {e}")))?;
    let count = get_u32(&mut r)?;
    if count != config.backbone.vocab_size {
        return Err(CoreError::BadCheckpoint(format!(
            "vocabulary has {count} tokens, configuration says {}",
            config.backbone.vocab_size
        )));
    }
    let mut tokens = Vec::with_capacity(count);
    for _ in 0..count {
        let len = get_u32(&mut r)?;
        if len > MAX_TOKEN_BYTES {
            return Err(CoreError::BadCheckpoint(format!("token length {len} is implausible")));
        }
        let mut bytes = vec![0u8; len];
        r.read_exact(&mut bytes).map_err(truncated)?;
        tokens.push(String::from_utf8(bytes).map_err(|_| CoreError::BadCheckpoint("token is not UTF-8".into()))?);
    }
    let vocab = Vocabulary::from_tokens(tokens).map_err(|e| CoreError::BadCheckpoint(e.to_string()))?;
    let params = read_params(&mut r)?;
    let model = CorrectorModel {
        kind,
        config,
        vocab,
        params,
    };
    let expected = CorrectorModel::random(kind, config, model.vocab.clone(), 0)?;
    if !expected.params.same_layout(&model.params) {
        return Err(CoreError::BadCheckpoint(format!(
            "parameters do not match a {kind} model with this configuration"
        )));
    }
    Ok(model)
}
