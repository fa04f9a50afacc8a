//! Head checkpoints: an `MVE1` binary tensor file plus a JSON sidecar.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! magic     4 bytes "MVE1"
//! version   u32     1
//! count     u32     number of tensors
//! table     count x (u16 name length, name, u32 ndim, ndim x u32 dims)
//! data      f32 values of every tensor, in table order
//! ```
//!
//! Parameters are trained in f64 and stored as f32. The sidecar (same path
//! with a `.json` extension) records normalization statistics, head shape,
//! log-variance clamp and a SHA-256 of the training config.

use std::fs;
use std::path::{Path, PathBuf};

use lifespan_core::head::{HeadError, MveHeadParams, LOGVAR_MAX, LOGVAR_MIN};
use lifespan_core::{NormalizationStats, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fsutil;

pub const MAGIC: &[u8; 4] = b"MVE1";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing normalization sidecar {0}")]
    MissingSidecar(PathBuf),
    #[error("sidecar {path}: {source}")]
    Sidecar {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("not an MVE1 checkpoint")]
    BadMagic,
    #[error("unsupported MVE1 version {0}")]
    BadVersion(u32),
    #[error("truncated checkpoint")]
    Truncated,
    #[error("tensor table mismatch at {name}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("tensor table has {found} tensors, expected {expected}")]
    TensorCount { expected: usize, found: usize },
    #[error(transparent)]
    Head(#[from] HeadError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format: String,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub activation: String,
    pub logvar_clamp: [f64; 2],
    pub normalization: NormalizationStats,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_config: Option<TrainConfig>,
}

impl CheckpointMeta {
    pub fn new(params: &MveHeadParams, stats: NormalizationStats, config: Option<&TrainConfig>) -> Self {
        Self {
            format: "MVE1".into(),
            input_dim: params.input_dim(),
            hidden_dim: params.hidden_dim(),
            activation: "tanh".into(),
            logvar_clamp: [LOGVAR_MIN, LOGVAR_MAX],
            normalization: stats,
            config_hash: config.map(config_hash).unwrap_or_default(),
            train_config: config.cloned(),
        }
    }
}

/// Hex SHA-256 of the config's JSON serialization.
pub fn config_hash(config: &TrainConfig) -> String {
    let json = serde_json::to_vec(config).expect("train config serializes");
    hex::encode(Sha256::digest(&json))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn encode(params: &MveHeadParams) -> Vec<u8> {
    let tensors = params.tensors();
    let mut out = Vec::with_capacity(64 + params.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in &tensors {
        out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }
    for t in &tensors {
        for &v in &params.values()[t.range.clone()] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8], input_dim: usize, hidden_dim: usize) -> Result<MveHeadParams, CheckpointError> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8], CheckpointError> {
        let s = bytes.get(pos..pos + n).ok_or(CheckpointError::Truncated)?;
        pos += n;
        Ok(s)
    };
    if take(4)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
    let version = u32_at(take(4)?);
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let template = MveHeadParams::zeros(input_dim, hidden_dim)?;
    let expected = template.tensors();
    let count = u32_at(take(4)?) as usize;
    if count != expected.len() {
        return Err(CheckpointError::TensorCount {
            expected: expected.len(),
            found: count,
        });
    }
    for t in &expected {
        let name_len = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
        let name = String::from_utf8_lossy(take(name_len)?).into_owned();
        let ndim = u32_at(take(4)?) as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(u32_at(take(4)?) as usize);
        }
        if name != t.name || shape != t.shape {
            return Err(CheckpointError::ShapeMismatch {
                name,
                expected: t.shape.clone(),
                found: shape,
            });
        }
    }
    let data = take(template.len() * 4)?;
    if pos != bytes.len() {
        return Err(CheckpointError::Truncated);
    }
    let values = data
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(MveHeadParams::from_values(input_dim, hidden_dim, values)?)
}

pub fn save(path: &Path, params: &MveHeadParams, meta: &CheckpointMeta) -> Result<(), CheckpointError> {
    let io = |source| CheckpointError::Io {
        path: path.to_owned(),
        source,
    };
    fsutil::write_atomic(path, &encode(params)).map_err(io)?;
    let side = sidecar_path(path);
    let json = serde_json::to_vec_pretty(meta).expect("meta serializes");
    fsutil::write_atomic(&side, &json).map_err(|source| CheckpointError::Io { path: side, source })
}

pub fn load(path: &Path) -> Result<(MveHeadParams, CheckpointMeta), CheckpointError> {
    let side = sidecar_path(path);
    if !side.exists() {
        return Err(CheckpointError::MissingSidecar(side));
    }
    let meta_bytes = fs::read(&side).map_err(|source| CheckpointError::Io {
        path: side.clone(),
        source,
    })?;
    let meta: CheckpointMeta = serde_json::from_slice(&meta_bytes)
        .map_err(|source| CheckpointError::Sidecar { path: side, source })?;
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_owned(),
        source,
    })?;
    let params = decode(&bytes, meta.input_dim, meta.hidden_dim)?;
    Ok((params, meta))
}
