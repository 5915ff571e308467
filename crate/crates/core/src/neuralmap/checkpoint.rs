//! `NSM1` checkpoint files.
//!
//! Layout: the four magic bytes `NSM1`, a little-endian `u32` byte length,
//! that many bytes of UTF-8 JSON header (architecture, parameter count,
//! metadata), then the parameters as little-endian `f64`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Architecture, NeuralMap, NeuralMapError};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"NSM1";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMetadata {
    pub name: String,
    /// Tool and version that wrote the file.
    pub created_by: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_loss: Option<f64>,
}

impl CheckpointMetadata {
    pub fn named(name: impl Into<String>) -> Self {
        CheckpointMetadata {
            name: name.into(),
            created_by: concat!("neuralmaps ", env!("CARGO_PKG_VERSION")).to_string(),
            ..Default::default()
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    architecture: Architecture,
    param_count: usize,
    metadata: CheckpointMetadata,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub map: NeuralMap,
    pub metadata: CheckpointMetadata,
}

pub fn encode(map: &NeuralMap, metadata: &CheckpointMetadata) -> Vec<u8> {
    let header = Header {
        version: FORMAT_VERSION,
        architecture: map.arch().clone(),
        param_count: map.params().len(),
        metadata: metadata.clone(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(8 + json.len() + 8 * map.params().len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for p in map.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint, NeuralMapError> {
    let corrupt = |m: &str| NeuralMapError::Corrupt(m.to_string());
    if bytes.len() < 8 {
        return Err(corrupt("file shorter than the fixed preamble"));
    }
    if &bytes[..3] != b"NSM" {
        return Err(corrupt("bad magic bytes"));
    }
    if bytes[3] != CHECKPOINT_MAGIC[3] {
        return Err(NeuralMapError::VersionMismatch {
            found: String::from_utf8_lossy(&bytes[..4]).into_owned(),
            expected: "NSM1".into(),
        });
    }
    let hlen = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    if body.len() < hlen {
        return Err(corrupt("truncated header"));
    }
    let header: Header = serde_json::from_slice(&body[..hlen])
        .map_err(|e| NeuralMapError::Corrupt(format!("header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(NeuralMapError::VersionMismatch {
            found: header.version.to_string(),
            expected: FORMAT_VERSION.to_string(),
        });
    }
    if header.architecture.param_count() != header.param_count {
        return Err(corrupt("parameter count disagrees with architecture"));
    }
    let payload = &body[hlen..];
    if payload.len() != 8 * header.param_count {
        return Err(NeuralMapError::Corrupt(format!(
            "payload holds {} bytes, expected {}",
            payload.len(),
            8 * header.param_count
        )));
    }
    let params = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let map = NeuralMap::from_params(&header.architecture, params).map_err(|e| match e {
        NeuralMapError::InvalidArchitecture(m) => NeuralMapError::Corrupt(m),
        other => other,
    })?;
    Ok(Checkpoint {
        map,
        metadata: header.metadata,
    })
}

pub fn save(
    map: &NeuralMap,
    metadata: &CheckpointMetadata,
    path: impl AsRef<Path>,
) -> Result<(), NeuralMapError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(map, metadata))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint, NeuralMapError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

/// Loads a checkpoint and requires a given output dimension.
pub fn load_expecting(path: impl AsRef<Path>, out_dim: usize) -> Result<Checkpoint, NeuralMapError> {
    let ck = load(path)?;
    if ck.map.out_dim() != out_dim {
        return Err(NeuralMapError::ShapeMismatch {
            expected: out_dim,
            found: ck.map.out_dim(),
        });
    }
    Ok(ck)
}
