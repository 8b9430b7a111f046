//! Versioned, checksummed snapshots of a single ensemble member.
//!
//! File layout: one header line `fpu-lyap-checkpoint v<version> sha256=<hex>`
//! followed by the JSON payload the digest covers. Floats survive the JSON
//! round trip exactly, so a restored run continues bit for bit. The sampler
//! and tangent RNGs are only used to build the initial data, so no generator
//! state needs saving.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::sha256_hex;
use super::output::atomic_write;
use crate::lyapunov::BenettinRun;

pub const CHECKPOINT_MAGIC: &str = "fpu-lyap-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}: not a checkpoint file")]
    Magic(PathBuf),
    #[error("{path}: checkpoint version {found}, this build reads version {expected}")]
    Version { path: PathBuf, found: String, expected: u32 },
    #[error("{0}: checksum mismatch, checkpoint is corrupt")]
    Checksum(PathBuf),
    #[error("{path}: unreadable payload: {msg}")]
    Payload { path: PathBuf, msg: String },
    #[error("{path}: checkpoint belongs to {what}")]
    Mismatch { path: PathBuf, what: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberCheckpoint {
    pub config_hash: String,
    pub member: usize,
    pub run: BenettinRun,
}

impl MemberCheckpoint {
    /// Rejects a checkpoint written for another run or member.
    pub fn expect(self, path: &Path, config_hash: &str, member: usize) -> Result<Self, CheckpointError> {
        if self.config_hash != config_hash {
            return Err(CheckpointError::Mismatch {
                path: path.to_path_buf(),
                what: format!("config {}", self.config_hash),
            });
        }
        if self.member != member {
            return Err(CheckpointError::Mismatch {
                path: path.to_path_buf(),
                what: format!("member {}", self.member),
            });
        }
        Ok(self)
    }
}

pub fn checkpoint_path(run_dir: &Path, member: usize) -> PathBuf {
    run_dir.join("checkpoints").join(format!("member_{member:04}.ckpt"))
}

pub fn encode(ck: &MemberCheckpoint) -> Vec<u8> {
    let payload = serde_json::to_vec(ck).expect("checkpoint serializes");
    let mut out = format!("{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION} sha256={}\n", sha256_hex(&payload)).into_bytes();
    out.extend_from_slice(&payload);
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<MemberCheckpoint, CheckpointError> {
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| CheckpointError::Magic(path.into()))?;
    let header = std::str::from_utf8(&bytes[..split]).map_err(|_| CheckpointError::Magic(path.into()))?;
    let mut fields = header.split(' ');
    if fields.next() != Some(CHECKPOINT_MAGIC) {
        return Err(CheckpointError::Magic(path.into()));
    }
    let version = fields.next().unwrap_or("");
    if version != format!("v{CHECKPOINT_VERSION}") {
        return Err(CheckpointError::Version {
            path: path.into(),
            found: version.to_string(),
            expected: CHECKPOINT_VERSION,
        });
    }
    let digest = fields
        .next()
        .and_then(|f| f.strip_prefix("sha256="))
        .ok_or_else(|| CheckpointError::Magic(path.into()))?;
    let payload = &bytes[split + 1..];
    if sha256_hex(payload) != digest {
        return Err(CheckpointError::Checksum(path.into()));
    }
    serde_json::from_slice(payload).map_err(|e| CheckpointError::Payload {
        path: path.into(),
        msg: e.to_string(),
    })
}

/// Atomic: a crash leaves either the old or the new checkpoint.
pub fn write_checkpoint(path: &Path, ck: &MemberCheckpoint) -> Result<(), CheckpointError> {
    atomic_write(path, &encode(ck)).map_err(|source| CheckpointError::Io {
        path: path.into(),
        source,
    })
}

pub fn read_checkpoint(path: &Path) -> Result<MemberCheckpoint, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.into(),
        source,
    })?;
    decode(&bytes, path)
}
