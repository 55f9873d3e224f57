//! Binary model checkpoints.
//!
//! Layout: 4-byte magic `PLCK`, format version (u32 LE), header length
//! (u64 LE), JSON header, then every parameter as an f64 LE.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::hqcnn::{ArchConfig, Model, NormStats, TrainingConfig, TrainingHistory};
use crate::scenario::SystemConfig;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PLCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub system: SystemConfig,
    pub arch: ArchConfig,
    pub training: TrainingConfig,
    /// Normalization of the training split; applied to every later input.
    pub stats: NormStats,
    pub config_hash: String,
    pub history: Option<TrainingHistory>,
    pub model: Model,
}

#[derive(Serialize, Deserialize)]
struct Header {
    num_params: usize,
    #[serde(flatten)]
    checkpoint: Checkpoint,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut meta = self.clone();
        let params = std::mem::take(meta.model.params_mut());
        let header = serde_json::to_vec(&Header { num_params: params.len(), checkpoint: meta })?;
        let mut out = Vec::with_capacity(16 + header.len() + 8 * params.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for p in params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let take = |at: usize, n: usize| {
            bytes.get(at..at + n).ok_or_else(|| Error::Format("checkpoint is truncated".into()))
        };
        if take(0, 4)? != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(take(4, 4)?.try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("checkpoint version {version} (expected {CHECKPOINT_VERSION})")));
        }
        let len = u64::from_le_bytes(take(8, 8)?.try_into().expect("8 bytes")) as usize;
        let header: Header = serde_json::from_slice(take(16, len)?)?;
        let body = &bytes[16 + len..];
        if body.len() != 8 * header.num_params {
            return Err(Error::Format(format!(
                "checkpoint holds {} parameter bytes, header announces {} parameters",
                body.len(),
                header.num_params
            )));
        }
        let mut ck = header.checkpoint;
        *ck.model.params_mut() = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        ck.model.check()?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
