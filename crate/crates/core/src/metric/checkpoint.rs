//! Model checkpoint: `b"KIRX"`, u32 version, u32 input/hidden/output dims,
//! one activation tag byte, then little-endian f64 parameters in the order
//! `W1` (row-major), `b1`, `W2` (row-major), `b2`.

use std::fs;
use std::path::Path;

use super::model::{param_count, Activation, MetricModel};
use super::MetricError;

pub const MAGIC: &[u8; 4] = b"KIRX";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 12 + 1;

pub fn encode_checkpoint(model: &MetricModel) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * model.param_count());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for d in [model.input_dim, model.hidden_dim, model.output_dim] {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    buf.push(model.activation.tag());
    for p in model.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    buf
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<MetricModel, MetricError> {
    let corrupt = |m: &str| MetricError::CorruptCheckpoint(m.to_string());
    if bytes.len() < HEADER_LEN {
        return Err(corrupt("truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    if word(4) != VERSION {
        return Err(corrupt("unsupported version"));
    }
    let (input, hidden, output) = (word(8) as usize, word(12) as usize, word(16) as usize);
    let activation = Activation::from_tag(bytes[20]).ok_or_else(|| corrupt("unknown activation"))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * param_count(input, hidden, output) {
        return Err(corrupt("parameter block size does not match dims"));
    }
    let params = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    MetricModel::from_params(input, hidden, output, activation, params)
}

pub fn save_checkpoint(model: &MetricModel, path: &Path) -> Result<(), MetricError> {
    fs::write(path, encode_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<MetricModel, MetricError> {
    decode_checkpoint(&fs::read(path)?)
}
