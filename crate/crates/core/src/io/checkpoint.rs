//! Model checkpoints: magic, `u64` header length, JSON header, then every
//! tensor as little-endian `f64` (grids by level, then per layer weights
//! before biases).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inr::{ModelConfig, ModelParams};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"STINRCKP";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub model: ModelConfig,
    pub seed: u64,
    /// Training grid the model was fitted on.
    pub n: usize,
    pub frames: usize,
    pub tensor_lengths: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn new(model: ModelConfig, seed: u64, n: usize, frames: usize, params: ModelParams) -> Result<Self> {
        params.check_shapes(&model)?;
        Ok(Self {
            header: CheckpointHeader {
                model,
                seed,
                n,
                frames,
                tensor_lengths: params.tensor_lengths(),
            },
            params,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + header.len() + 8 * self.params.num_params());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for t in self.params.tensors() {
            t.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |msg: String| Error::format(path, msg);
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("missing checkpoint magic".into()));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes
            .get(16..16 + hlen)
            .ok_or_else(|| bad("truncated header".into()))?;
        let header: CheckpointHeader =
            serde_json::from_slice(body).map_err(|e| bad(format!("bad header: {e}")))?;
        header.model.validate()?;
        let mut params = ModelParams::zeros(&header.model);
        if params.tensor_lengths() != header.tensor_lengths {
            return Err(bad("tensor lengths disagree with the model config".into()));
        }
        let payload = &bytes[16 + hlen..];
        if payload.len() != 8 * params.num_params() {
            return Err(bad(format!(
                "payload is {} bytes, expected {}",
                payload.len(),
                8 * params.num_params()
            )));
        }
        let mut values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        for t in params.tensors_mut() {
            t.iter_mut().for_each(|x| *x = values.next().expect("length checked"));
        }
        Ok(Self { header, params })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes, path)
    }
}
