//! Checkpoint container: `KGXCKPT\0`, u32 version, u64 header length, JSON header,
//! then each tensor as name, u64 rows, u64 cols, and little-endian f64 values.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{LinkModel, ModelConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::kgraph::KnowledgeGraph;

const MAGIC: &[u8; 8] = b"KGXCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Registry name of the model.
    pub model: String,
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    pub graph_hash: String,
    pub epoch: usize,
    pub loss_history: Vec<f64>,
    pub tensor_names: Vec<String>,
    pub tensors: Vec<Array2<f64>>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    model: String,
    model_config: ModelConfig,
    train_config: TrainConfig,
    graph_hash: String,
    epoch: usize,
    loss_history: Vec<f64>,
}

impl Checkpoint {
    pub fn from_model(
        model: &dyn LinkModel,
        train_config: TrainConfig,
        graph_hash: String,
        epoch: usize,
        loss_history: Vec<f64>,
    ) -> Self {
        Checkpoint {
            model: model.name().to_string(),
            model_config: model.config().clone(),
            train_config,
            graph_hash,
            epoch,
            loss_history,
            tensor_names: model.tensor_names(),
            tensors: model.tensors().into_iter().cloned().collect(),
        }
    }

    /// Refuses a graph other than the one trained on, unless `force`.
    pub fn verify_graph(&self, graph: &KnowledgeGraph, force: bool) -> Result<()> {
        let found = graph.digest();
        if found != self.graph_hash {
            if force {
                log::warn!("graph hash mismatch ignored (--force)");
            } else {
                return Err(Error::GraphMismatch {
                    expected: self.graph_hash.clone(),
                    found,
                });
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&Header {
            model: self.model.clone(),
            model_config: self.model_config.clone(),
            train_config: self.train_config.clone(),
            graph_hash: self.graph_hash.clone(),
            epoch: self.epoch,
            loss_history: self.loss_history.clone(),
        })?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in self.tensor_names.iter().zip(&self.tensors) {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.nrows() as u64).to_le_bytes());
            out.extend_from_slice(&(t.ncols() as u64).to_le_bytes());
            for v in t.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = bytes;
        let mut take = |n: usize| -> Result<&[u8]> {
            if cur.len() < n {
                return Err(Error::Format("checkpoint truncated".into()));
            }
            let (h, t) = cur.split_at(n);
            cur = t;
            Ok(h)
        };
        if take(8)? != MAGIC {
            return Err(Error::Format("not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let hlen = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let header: Header = serde_json::from_slice(take(hlen)?)?;
        let n = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let mut tensor_names = Vec::with_capacity(n);
        let mut tensors = Vec::with_capacity(n);
        for _ in 0..n {
            let len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            let name = String::from_utf8(take(len)?.to_vec()).map_err(|e| Error::Format(e.to_string()))?;
            let rows = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
            let cols = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
            let count = rows
                .checked_mul(cols)
                .and_then(|c| c.checked_mul(8))
                .ok_or_else(|| Error::Format("tensor too large".into()))?;
            let raw = take(count)?;
            let data: Vec<f64> = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensor_names.push(name);
            tensors.push(Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Format(e.to_string()))?);
        }
        if !cur.is_empty() {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        Ok(Checkpoint {
            model: header.model,
            model_config: header.model_config,
            train_config: header.train_config,
            graph_hash: header.graph_hash,
            epoch: header.epoch,
            loss_history: header.loss_history,
            tensor_names,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
