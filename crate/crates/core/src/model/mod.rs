//! Link-prediction models behind a common trait, a name-keyed registry, and the
//! shared training loop.

pub mod checkpoint;
pub mod gcn;
pub mod loss;
mod optim;
pub mod sampling;
mod train;

use std::borrow::Cow;
use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kgraph::{KnowledgeGraph, NodeId, Pair};

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use gcn::{ModelParams, RelationalGcn};
pub use loss::{pair_loss, LossMode, LOSS_EPS};
pub use optim::{Optimizer, OptimizerKind};
pub use sampling::{sample_negatives, NegativeSampler};
pub use train::{train, train_model, BatchSize, TrainConfig, TrainStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub out_dim: usize,
    pub n_layers: usize,
    pub seed: u64,
    /// Propagate with `D^-1/2 A D^-1/2` instead of raw 0/1 adjacency.
    pub normalize_adjacency: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 64,
            out_dim: 64,
            n_layers: 1,
            seed: 0,
            normalize_adjacency: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.out_dim == 0 {
            return Err(Error::InvalidInput("embedding dimensions must be positive".into()));
        }
        if self.n_layers == 0 {
            return Err(Error::InvalidInput("n_layers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Positives matched 1:1 with sampled negatives.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairBatch {
    pub positives: Vec<Pair>,
    pub negatives: Vec<Pair>,
}

/// Scores node pairs against a fixed graph. Higher means more plausible.
pub trait PairScorer: Sync {
    fn score(&self, i: NodeId, j: NodeId) -> f64;

    fn score_pairs(&self, pairs: &[Pair]) -> Vec<f64> {
        pairs.iter().map(|&(i, j)| self.score(i, j)).collect()
    }
}

/// A trainable link-prediction model. Parameters are exposed as a flat list of
/// named matrices so that optimizers and checkpoints stay model-agnostic.
pub trait LinkModel: Send + Sync {
    fn name(&self) -> &'static str;

    fn config(&self) -> &ModelConfig;

    fn tensor_names(&self) -> Vec<String>;

    fn tensors(&self) -> Vec<&Array2<f64>>;

    fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>>;

    /// Graph as this model propagates over it.
    fn prepare_graph<'g>(&self, graph: &'g KnowledgeGraph) -> Cow<'g, KnowledgeGraph> {
        Cow::Borrowed(graph)
    }

    /// Scorer over `graph`, which must already be prepared.
    fn scorer<'a>(&'a self, graph: &'a KnowledgeGraph) -> Result<Box<dyn PairScorer + 'a>>;

    /// Loss over `batch` and its gradient, one matrix per tensor in `tensors()` order.
    fn loss_and_grad(
        &self,
        graph: &KnowledgeGraph,
        batch: &PairBatch,
        mode: LossMode,
    ) -> Result<(f64, Vec<Array2<f64>>)>;

    /// Projection or constraint applied after every optimizer step.
    fn after_step(&mut self) {}

    /// Per-node vectors for export.
    fn node_embeddings(&self) -> ArrayView2<'_, f64>;

    fn as_gcn(&self) -> Option<&RelationalGcn> {
        None
    }

    /// Convenience: prepare the graph and score `pairs`.
    fn score_pairs(&self, graph: &KnowledgeGraph, pairs: &[Pair]) -> Result<Vec<f64>> {
        let g = self.prepare_graph(graph);
        let s = self.scorer(&g)?;
        Ok(s.score_pairs(pairs))
    }
}

type InitFn = fn(&ModelConfig, &KnowledgeGraph) -> Result<Box<dyn LinkModel>>;
type RestoreFn = fn(&ModelConfig, &KnowledgeGraph, Vec<Array2<f64>>) -> Result<Box<dyn LinkModel>>;

/// How to create a model fresh and from checkpoint tensors.
#[derive(Clone, Copy)]
pub struct ModelEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub init: InitFn,
    pub restore: RestoreFn,
}

impl std::fmt::Debug for ModelEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelEntry").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ModelRegistry {
    entries: BTreeMap<&'static str, ModelEntry>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// `graphix`, `transe`, `distmult`.
    pub fn builtin() -> Self {
        let mut r = Self::new();
        r.register(gcn::ENTRY);
        r.register(crate::baselines::TRANSE_ENTRY);
        r.register(crate::baselines::DISTMULT_ENTRY);
        r
    }

    pub fn register(&mut self, entry: ModelEntry) {
        self.entries.insert(entry.name, entry);
    }

    pub fn get(&self, name: &str) -> Result<&ModelEntry> {
        self.entries.get(name).ok_or_else(|| Error::Unknown {
            what: "model",
            name: name.to_string(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn init(&self, name: &str, config: &ModelConfig, graph: &KnowledgeGraph) -> Result<Box<dyn LinkModel>> {
        config.validate()?;
        (self.get(name)?.init)(config, graph)
    }

    pub fn restore(&self, checkpoint: &Checkpoint, graph: &KnowledgeGraph) -> Result<Box<dyn LinkModel>> {
        let entry = self.get(&checkpoint.model)?;
        (entry.restore)(&checkpoint.model_config, graph, checkpoint.tensors.clone())
    }
}
