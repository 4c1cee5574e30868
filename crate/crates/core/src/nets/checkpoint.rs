//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "ABTT" | u32 version | u64 header_len | header (JSON) | payload (f32 LE)
//! ```
//!
//! The header carries the network architecture, run metadata, and a tensor
//! table of `{name, shape, offset}` where `offset` is a byte offset into the
//! payload.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::agent::{Agent, AgentArch};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ABTT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("file truncated")]
    Truncated,
    #[error("malformed header: {0}")]
    Header(String),
    #[error("tensor table mismatch: {0}")]
    ShapeTable(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config_digest: String,
    pub iteration: u64,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    arch: AgentArch,
    meta: CheckpointMeta,
    tensors: Vec<TensorEntry>,
}

pub fn encode(agent: &Agent<f32>, meta: &CheckpointMeta) -> Vec<u8> {
    let mut entries = Vec::new();
    let mut payload = Vec::new();
    for (name, shape, data) in agent.params() {
        entries.push(TensorEntry {
            name,
            shape,
            offset: payload.len(),
        });
        for x in data {
            payload.extend_from_slice(&x.to_le_bytes());
        }
    }
    let header = Header {
        arch: agent.arch.clone(),
        meta: meta.clone(),
        tensors: entries,
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + header.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    out
}

pub fn decode(bytes: &[u8]) -> Result<(Agent<f32>, CheckpointMeta), CheckpointError> {
    if bytes.len() < 4 {
        return Err(CheckpointError::Truncated);
    }
    if &bytes[0..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if bytes.len() < 16 {
        return Err(CheckpointError::Truncated);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let header_end = 16usize
        .checked_add(header_len)
        .ok_or(CheckpointError::Truncated)?;
    if bytes.len() < header_end {
        return Err(CheckpointError::Truncated);
    }
    let header: Header = serde_json::from_slice(&bytes[16..header_end])
        .map_err(|e| CheckpointError::Header(e.to_string()))?;
    let payload = &bytes[header_end..];

    let template = Agent::<f32>::zeros(header.arch.clone());
    let expected = template.params();
    if header.tensors.len() != expected.len() {
        return Err(CheckpointError::ShapeTable(format!(
            "{} tensors declared, architecture needs {}",
            header.tensors.len(),
            expected.len()
        )));
    }
    let mut named = Vec::with_capacity(expected.len());
    let mut payload_used = 0usize;
    for (name, shape, _) in &expected {
        let entry = header
            .tensors
            .iter()
            .find(|e| &e.name == name)
            .ok_or_else(|| CheckpointError::ShapeTable(format!("missing tensor `{name}`")))?;
        if &entry.shape != shape {
            return Err(CheckpointError::ShapeTable(format!(
                "`{name}` declared {:?}, expected {:?}",
                entry.shape, shape
            )));
        }
        let n: usize = shape.iter().product();
        let end = entry.offset + 4 * n;
        if end > payload.len() {
            return Err(CheckpointError::Truncated);
        }
        payload_used += 4 * n;
        let data = payload[entry.offset..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        named.push((
            name.clone(),
            Tensor {
                shape: shape.clone(),
                data,
            },
        ));
    }
    if payload_used != payload.len() {
        return Err(CheckpointError::ShapeTable(format!(
            "payload holds {} bytes, tensors cover {payload_used}",
            payload.len()
        )));
    }
    let agent = Agent::from_tensors(header.arch, &named)
        .map_err(|e| CheckpointError::ShapeTable(e.to_string()))?;
    Ok((agent, header.meta))
}

pub fn save_checkpoint(
    agent: &Agent<f32>,
    meta: &CheckpointMeta,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, encode(agent, meta)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Agent<f32>, CheckpointMeta)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode(&bytes)?)
}

/// SHA-256 over every parameter's little-endian bytes, in table order.
pub fn weights_digest(agent: &Agent<f32>) -> String {
    let mut h = Sha256::new();
    for (name, _, data) in agent.params() {
        h.update(name.as_bytes());
        for x in data {
            h.update(x.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}
