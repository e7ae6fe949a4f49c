//! Binary model checkpoint.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic    8 bytes  "OIMCKPT" + format version byte (currently 1)
//! d        u32      feature dimension
//! c        u32      foreground class count
//! k        u32      refinement head count
//! payload  f64 * (2*(c*d + c) + k*((c+1)*d + c+1))
//! ```
//!
//! Payload order: classification weight then bias, detection weight then
//! bias, then each refinement head's weight and bias. Weights are
//! row-major `out x in`. The decoder rejects bad magic, header
//! dimensions beyond sanity caps, truncated or trailing bytes, and
//! non-finite parameters.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::head::{Linear, MidModel};

const MAGIC: [u8; 8] = *b"OIMCKPT\x01";
const MAX_FEATURE_DIM: usize = 65_536;
const MAX_CLASSES: usize = 4_096;
const MAX_HEADS: usize = 64;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: not an oim checkpoint")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u8),
    #[error("invalid header: {0}")]
    BadHeader(String),
    #[error("checkpoint length {found} does not match header (expected {expected})")]
    LengthMismatch { expected: usize, found: usize },
    #[error("checkpoint contains non-finite parameters")]
    NonFinite,
}

/// Serializes the model to bytes.
pub fn encode_checkpoint(model: &MidModel) -> Vec<u8> {
    let d = model.feature_dim();
    let c = model.num_classes();
    let k = model.refine_heads();
    let mut out = Vec::with_capacity(8 + 12 + 8 * (2 * (c * d + c) + k * ((c + 1) * d + c + 1)));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(c as u32).to_le_bytes());
    out.extend_from_slice(&(k as u32).to_le_bytes());
    let mut push_layer = |layer: &Linear| {
        for &v in layer.weight.iter().chain(&layer.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    };
    push_layer(&model.classification);
    push_layer(&model.detection);
    for layer in &model.refine {
        push_layer(layer);
    }
    out
}

/// Decodes a checkpoint from bytes; never panics on malformed input.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<MidModel, CheckpointError> {
    if bytes.len() < 8 {
        return Err(CheckpointError::BadMagic);
    }
    if bytes[..7] != MAGIC[..7] {
        return Err(CheckpointError::BadMagic);
    }
    if bytes[7] != MAGIC[7] {
        return Err(CheckpointError::UnsupportedVersion(bytes[7]));
    }
    if bytes.len() < 20 {
        return Err(CheckpointError::BadHeader("truncated header".to_string()));
    }
    let read_u32 = |offset: usize| {
        u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap()) as usize
    };
    let d = read_u32(8);
    let c = read_u32(12);
    let k = read_u32(16);
    if d == 0 || d > MAX_FEATURE_DIM {
        return Err(CheckpointError::BadHeader(format!(
            "feature dimension {d} outside 1..={MAX_FEATURE_DIM}"
        )));
    }
    if c == 0 || c > MAX_CLASSES {
        return Err(CheckpointError::BadHeader(format!(
            "class count {c} outside 1..={MAX_CLASSES}"
        )));
    }
    if k == 0 || k > MAX_HEADS {
        return Err(CheckpointError::BadHeader(format!(
            "refinement head count {k} outside 1..={MAX_HEADS}"
        )));
    }
    let values = 2 * (c * d + c) + k * ((c + 1) * d + c + 1);
    let expected = 20 + 8 * values;
    if bytes.len() != expected {
        return Err(CheckpointError::LengthMismatch {
            expected,
            found: bytes.len(),
        });
    }

    let mut cursor = 20usize;
    let mut take = |count: usize| -> Vec<f64> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push(f64::from_le_bytes(
                bytes[cursor..cursor + 8].try_into().unwrap(),
            ));
            cursor += 8;
        }
        out
    };
    let mut read_layer = |in_dim: usize, out_dim: usize| Linear {
        in_dim,
        out_dim,
        weight: take(out_dim * in_dim),
        bias: take(out_dim),
    };
    let classification = read_layer(d, c);
    let detection = read_layer(d, c);
    let refine: Vec<Linear> = (0..k).map(|_| read_layer(d, c + 1)).collect();

    let model = MidModel {
        classification,
        detection,
        refine,
    };
    if !model.is_finite() {
        return Err(CheckpointError::NonFinite);
    }
    Ok(model)
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &MidModel) -> Result<(), CheckpointError> {
    fs::write(path, encode_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MidModel, CheckpointError> {
    decode_checkpoint(&fs::read(path)?)
}
