//! Binary checkpoint files.
//!
//! Layout: `WZOO`, one format-version byte, a little-endian `u32` header
//! length, a JSON header, then every layer's kernel followed by its bias as
//! little-endian `f32`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::hyper::HyperParams;
use super::record::Metrics;
use crate::engine::{NetworkSpec, ParameterSet};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"WZOO";
pub const CHECKPOINT_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub name: String,
    pub kernel_shape: Vec<usize>,
    pub bias_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub model_id: String,
    pub architecture: NetworkSpec,
    pub hyperparams: HyperParams,
    pub metrics: Metrics,
    pub seed: u64,
    pub layers: Vec<LayerEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: ParameterSet<f32>,
}

/// Serialize with keys sorted, so equal values always give equal bytes.
pub(crate) fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's default map is a BTreeMap, so a round trip through Value sorts keys.
    Ok(serde_json::to_string(&serde_json::to_value(value)?)?)
}

pub fn encode_checkpoint(header: &CheckpointHeader, params: &ParameterSet<f32>) -> Result<Vec<u8>> {
    params.matches(&header.architecture)?;
    let json = canonical_json(header)?;
    let header_len = u32::try_from(json.len()).map_err(|_| Error::validation("checkpoint header too large"))?;
    let mut out = Vec::with_capacity(9 + json.len() + 4 * params.len());
    out.extend_from_slice(MAGIC);
    out.push(CHECKPOINT_VERSION);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(json.as_bytes());
    for i in 0..params.num_layers() {
        for v in params.kernel(i).iter().chain(params.bias(i)) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 9 || &bytes[..4] != MAGIC {
        return Err(Error::parse("not a checkpoint (bad magic)"));
    }
    if bytes[4] != CHECKPOINT_VERSION {
        return Err(Error::Version(format!(
            "checkpoint format {} (supported: {CHECKPOINT_VERSION})",
            bytes[4]
        )));
    }
    let header_len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let body = &bytes[9..];
    if body.len() < header_len {
        return Err(Error::parse("truncated checkpoint header"));
    }
    let header: CheckpointHeader = serde_json::from_slice(&body[..header_len])
        .map_err(|e| Error::parse(format!("checkpoint header: {e}")))?;
    let mut params = ParameterSet::<f32>::zeros_for(&header.architecture)?;
    let shapes: Vec<&Vec<usize>> = header.layers.iter().map(|l| &l.kernel_shape).collect();
    let expected: Vec<&Vec<usize>> = params.layout().layers.iter().map(|l| &l.kernel_shape).collect();
    if shapes != expected {
        return Err(Error::parse("checkpoint layer table disagrees with its architecture"));
    }
    let payload = &body[header_len..];
    if payload.len() != 4 * params.len() {
        return Err(Error::parse(format!(
            "checkpoint payload has {} bytes, expected {}",
            payload.len(),
            4 * params.len()
        )));
    }
    // Storage order is kernel then bias per layer, which is exactly the flat layout.
    for (dst, src) in params.as_mut_slice().iter_mut().zip(payload.chunks_exact(4)) {
        *dst = f32::from_le_bytes(src.try_into().unwrap());
    }
    Ok(Checkpoint { header, params })
}

pub fn write_checkpoint(path: impl AsRef<Path>, header: &CheckpointHeader, params: &ParameterSet<f32>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(header, params)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// The layer table stored in a header: `L1`, `L2`, ... in declared order.
pub fn layer_entries(params: &ParameterSet<f32>) -> Vec<LayerEntry> {
    params
        .layout()
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| LayerEntry {
            name: format!("L{}", i + 1),
            kernel_shape: l.kernel_shape.clone(),
            bias_len: l.bias_len,
        })
        .collect()
}
