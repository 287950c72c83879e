//! `CVNN1` model checkpoints.
//!
//! Magic `CVNN1`, `u32` layer count, then `(u32 in, u32 out)` per layer, then
//! for each layer its weights (row-major, `out × in`) followed by its biases,
//! all `f64`. Little-endian throughout. Optimizer state is not stored.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{CvError, Result};
use crate::mlp::{Layer, MlpModel};

pub const MAGIC: &[u8; 5] = b"CVNN1";

pub fn encode_model(model: &MlpModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(model.layers.len() as u32).to_le_bytes());
    for layer in &model.layers {
        out.extend_from_slice(&(layer.in_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.out_dim() as u32).to_le_bytes());
    }
    for layer in &model.layers {
        for r in 0..layer.out_dim() {
            for c in 0..layer.in_dim() {
                out.extend_from_slice(&layer.weights[(r, c)].to_le_bytes());
            }
        }
        for &b in layer.bias.iter() {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    out
}

fn read_u32(bytes: &[u8], pos: &mut usize) -> Result<u32> {
    let chunk = bytes
        .get(*pos..*pos + 4)
        .ok_or_else(|| CvError::Format("truncated checkpoint header".into()))?;
    *pos += 4;
    Ok(u32::from_le_bytes(chunk.try_into().expect("4 bytes")))
}

pub fn decode_model(bytes: &[u8]) -> Result<MlpModel> {
    if bytes.len() < 5 || &bytes[..5] != MAGIC {
        return Err(CvError::Format("missing CVNN1 magic".into()));
    }
    let mut pos = 5;
    let count = read_u32(bytes, &mut pos)? as usize;
    if count == 0 {
        return Err(CvError::Format("checkpoint has no layers".into()));
    }
    let mut dims = Vec::with_capacity(count);
    for _ in 0..count {
        dims.push((read_u32(bytes, &mut pos)? as usize, read_u32(bytes, &mut pos)? as usize));
    }
    for w in dims.windows(2) {
        if w[0].1 != w[1].0 {
            return Err(CvError::Format(format!(
                "layer output {} does not feed next input {}",
                w[0].1, w[1].0
            )));
        }
    }
    let params: usize = dims.iter().map(|(i, o)| i * o + o).sum();
    let body = &bytes[pos..];
    if body.len() != params * 8 {
        return Err(CvError::Format(format!(
            "checkpoint body has {} bytes, expected {}",
            body.len(),
            params * 8
        )));
    }
    let mut values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut layers = Vec::with_capacity(count);
    for &(i, o) in &dims {
        let row_major: Vec<f64> = values.by_ref().take(i * o).collect();
        let weights = DMatrix::from_row_slice(o, i, &row_major);
        let bias = DVector::from_iterator(o, values.by_ref().take(o));
        layers.push(Layer { weights, bias });
    }
    let model = MlpModel::from_layers(layers);
    if !model.is_finite() {
        return Err(CvError::Format("checkpoint holds non-finite parameters".into()));
    }
    Ok(model)
}

pub fn write_model(path: &Path, model: &MlpModel) -> Result<()> {
    std::fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<MlpModel> {
    decode_model(&std::fs::read(path)?)
}
