//! Integrated-gradients node attribution for a scored edge.
//!
//! For every node `u` within `k` hops of the edge (endpoints included), the features
//! of `u` alone move along the straight path `0 -> x_u` while all other nodes keep
//! their trained features. The gradient of the edge score with respect to `x_u` is
//! averaged over the right-endpoint Riemann points `s/m`, `s = 1..m`, multiplied
//! elementwise by `x_u`, and reduced to a scalar with the L2 norm.

mod export;
mod local;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kgraph::{KnowledgeGraph, NodeId, NodeKind, Pair};
use crate::model::{LinkModel, RelationalGcn};

pub use export::{
    export_subgraph, ExporterRegistry, PredictedEdge, SubgraphExporter, SubgraphView, ViewEdge, ViewNode,
};
pub use local::LocalEdgeModel;

pub const DEFAULT_STEPS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttributionRequest {
    pub edge: Pair,
    pub steps: usize,
    pub hop_limit: usize,
}

impl AttributionRequest {
    /// Hop limit follows the model's layer count.
    pub fn for_model(model: &RelationalGcn, edge: Pair, steps: usize) -> Self {
        AttributionRequest {
            edge,
            steps,
            hop_limit: model.config().n_layers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub node: NodeId,
    pub kind: NodeKind,
    pub ig: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionReport {
    pub edge: Pair,
    pub score: f64,
    pub steps: usize,
    pub hop_limit: usize,
    /// Descending by `ig`, ties by ascending node id.
    pub contributions: Vec<Contribution>,
}

impl AttributionReport {
    pub fn ig(&self, node: NodeId) -> Option<f64> {
        self.contributions.iter().find(|c| c.node == node).map(|c| c.ig)
    }

    pub fn top_gene(&self) -> Option<NodeId> {
        rank_proteins(self).first().map(|&(n, _)| n)
    }

    pub fn to_json(&self, graph: &KnowledgeGraph) -> ReportJson {
        ReportJson {
            edge: [
                graph.label(self.edge.0).to_string(),
                graph.label(self.edge.1).to_string(),
            ],
            score: self.score,
            steps: self.steps,
            hop_limit: self.hop_limit,
            contributions: self
                .contributions
                .iter()
                .map(|c| ContributionJson {
                    label: graph.label(c.node).to_string(),
                    kind: c.kind,
                    ig: c.ig,
                })
                .collect(),
            top_gene: self.top_gene().map(|n| graph.label(n).to_string()),
        }
    }
}

/// Serialized attribution report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub edge: [String; 2],
    pub score: f64,
    pub steps: usize,
    pub hop_limit: usize,
    pub contributions: Vec<ContributionJson>,
    pub top_gene: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionJson {
    pub label: String,
    pub kind: NodeKind,
    pub ig: f64,
}

/// Nodes within `k` hops of either endpoint over all message-passing relations,
/// endpoints included, sorted by id.
pub fn neighborhood(graph: &KnowledgeGraph, edge: Pair, k: usize) -> Vec<NodeId> {
    graph
        .distances_from(&[edge.0, edge.1], Some(k))
        .iter()
        .enumerate()
        .filter(|(_, d)| d.is_some())
        .map(|(i, _)| NodeId(i))
        .collect()
}

/// Gene contributions, descending by IG with ties broken by ascending node id.
pub fn rank_proteins(report: &AttributionReport) -> Vec<(NodeId, f64)> {
    let mut genes: Vec<(NodeId, f64)> = report
        .contributions
        .iter()
        .filter(|c| c.kind == NodeKind::Gene)
        .map(|c| (c.node, c.ig))
        .collect();
    genes.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    genes
}

/// 1-based rank of `node` in `ranking`.
pub fn rank_of(ranking: &[(NodeId, f64)], node: NodeId) -> Option<usize> {
    ranking.iter().position(|&(n, _)| n == node).map(|p| p + 1)
}

/// Raw IG vector `x_u ⊙ mean_s grad_u F((s/m) x_u)` for one node of the local model.
pub fn ig_vector(local: &LocalEdgeModel, node: usize, steps: usize) -> Vec<f64> {
    let x = local.features(node);
    let acc = local.path_gradient_sum(node, steps);
    x.iter().zip(&acc).map(|(xi, a)| xi * a / steps as f64).collect()
}

pub fn integrated_gradients(
    graph: &KnowledgeGraph,
    model: &RelationalGcn,
    request: &AttributionRequest,
) -> Result<AttributionReport> {
    let (i, j) = request.edge;
    if i.0 >= graph.n_nodes() || j.0 >= graph.n_nodes() {
        return Err(Error::InvalidInput(format!("edge ({i}, {j}) is not in the graph")));
    }
    if request.steps == 0 {
        return Err(Error::InvalidInput("IG needs at least one step".into()));
    }
    if request.hop_limit != model.config().n_layers {
        return Err(Error::InvalidInput(format!(
            "hop limit {} differs from the model's {} layers",
            request.hop_limit,
            model.config().n_layers
        )));
    }
    let graph = model.prepare_graph(graph);
    let local = LocalEdgeModel::new(&graph, model.params(), request.edge)?;
    let igs: Vec<f64> = (0..local.n_nodes())
        .into_par_iter()
        .map(|u| {
            let v = ig_vector(&local, u, request.steps);
            v.iter().map(|x| x * x).sum::<f64>().sqrt()
        })
        .collect();
    let mut contributions: Vec<Contribution> = local
        .nodes()
        .iter()
        .zip(igs)
        .map(|(&node, ig)| Contribution {
            node,
            kind: graph.kind(node),
            ig,
        })
        .collect();
    contributions.sort_by(|a, b| b.ig.total_cmp(&a.ig).then(a.node.cmp(&b.node)));
    Ok(AttributionReport {
        edge: request.edge,
        score: local.score(),
        steps: request.steps,
        hop_limit: request.hop_limit,
        contributions,
    })
}
