//! Flat binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      4 bytes  "AGLS"
//! version    u32
//! records until EOF:
//!   name_len u32, name bytes (UTF-8)
//!   rank     u32, dims u64 × rank
//!   data     f64 × product(dims)
//! ```

use std::io::{ErrorKind, Read, Write};

use crate::error::{NnError, Result};
use crate::params::ParameterStore;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"AGLS";
pub const VERSION: u32 = 1;

pub fn write_params<W: Write>(mut w: W, store: &ParameterStore) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for (name, tensor) in store.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(tensor.rank() as u32).to_le_bytes())?;
        for &d in tensor.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in tensor.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn params_to_bytes(store: &ParameterStore) -> Vec<u8> {
    let mut buf = Vec::new();
    write_params(&mut buf, store).expect("writing to a Vec cannot fail");
    buf
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Reads `n` bytes, or returns `None` on a clean EOF before the first byte.
fn read_name_len<R: Read>(r: &mut R) -> Result<Option<u32>> {
    let mut b = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        match r.read(&mut b[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => return Err(NnError::BadCheckpoint("truncated record header".into())),
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Some(u32::from_le_bytes(b)))
}

pub fn read_params<R: Read>(mut r: R) -> Result<ParameterStore> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| NnError::BadCheckpoint("missing magic".into()))?;
    if &magic != MAGIC {
        return Err(NnError::BadCheckpoint(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(NnError::BadCheckpoint(format!("unsupported version {version}")));
    }
    let mut store = ParameterStore::new();
    while let Some(name_len) = read_name_len(&mut r)? {
        let mut name = vec![0u8; name_len as usize];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| NnError::BadCheckpoint("name is not UTF-8".into()))?;
        let rank = read_u32(&mut r)? as usize;
        let shape = (0..rank)
            .map(|_| read_u64(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut b = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        store.insert(name, Tensor::new(shape, data)?)?;
    }
    Ok(store)
}
