//! Relational graph convolution: `H = tanh(sum_r A_r X W_r)` per layer, starting
//! from a learned embedding table, with dot-product edge scores.

use ndarray::{Array2, ArrayView1, Axis, Zip};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use std::borrow::Cow;

use ndarray::ArrayView2;

use super::loss::{batch_loss, LossMode};
use super::{LinkModel, ModelConfig, ModelEntry, PairBatch, PairScorer};
use crate::error::{Error, Result};
use crate::kgraph::{KnowledgeGraph, NodeId, Pair, RelationKind};

/// Learned state: the input embedding table and, per layer, one weight matrix per
/// relation in graph order (`SelfLoop` last).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub x0: Array2<f64>,
    pub weights: Vec<Vec<Array2<f64>>>,
}

/// Same shapes as [`ModelParams`].
pub type Gradients = ModelParams;

impl ModelParams {
    pub fn zeros_like(&self) -> Self {
        ModelParams {
            x0: Array2::zeros(self.x0.raw_dim()),
            weights: self
                .weights
                .iter()
                .map(|layer| layer.iter().map(|w| Array2::zeros(w.raw_dim())).collect())
                .collect(),
        }
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    /// Flat tensor order: `x0`, then layer-major weights.
    pub fn into_tensors(self) -> Vec<Array2<f64>> {
        std::iter::once(self.x0)
            .chain(self.weights.into_iter().flatten())
            .collect()
    }

    pub fn tensors(&self) -> Vec<&Array2<f64>> {
        std::iter::once(&self.x0).chain(self.weights.iter().flatten()).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        std::iter::once(&mut self.x0)
            .chain(self.weights.iter_mut().flatten())
            .collect()
    }

    pub fn from_tensors(tensors: Vec<Array2<f64>>, n_layers: usize, n_relations: usize) -> Result<Self> {
        if tensors.len() != 1 + n_layers * n_relations {
            return Err(Error::Format(format!(
                "expected {} tensors for {} layers x {} relations, found {}",
                1 + n_layers * n_relations,
                n_layers,
                n_relations,
                tensors.len()
            )));
        }
        let mut it = tensors.into_iter();
        let x0 = it.next().unwrap();
        let weights: Vec<Vec<Array2<f64>>> = (0..n_layers).map(|_| it.by_ref().take(n_relations).collect()).collect();
        let p = ModelParams { x0, weights };
        p.check_shapes()?;
        Ok(p)
    }

    fn check_shapes(&self) -> Result<()> {
        let mut width = self.x0.ncols();
        for (l, layer) in self.weights.iter().enumerate() {
            let out = layer.first().map(|w| w.ncols()).unwrap_or(0);
            for w in layer {
                if w.nrows() != width || w.ncols() != out {
                    return Err(Error::Dimension(format!(
                        "layer {l} weight is {}x{}, expected {width}x{out}",
                        w.nrows(),
                        w.ncols()
                    )));
                }
            }
            width = out;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Uniform `[-1/sqrt(C), 1/sqrt(C)]` embeddings and uniform Glorot weights.
pub fn init_params(config: &ModelConfig, n_nodes: usize, n_relations: usize, seed: u64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = config.embed_dim;
    let s = 1.0 / (c as f64).sqrt();
    let emb = Uniform::new_inclusive(-s, s);
    let x0 = Array2::from_shape_simple_fn((n_nodes, c), || emb.sample(&mut rng));
    let mut weights = Vec::with_capacity(config.n_layers);
    let mut width = c;
    for _ in 0..config.n_layers {
        let d = config.out_dim;
        let bound = (6.0 / (width + d) as f64).sqrt();
        let glorot = Uniform::new_inclusive(-bound, bound);
        weights.push(
            (0..n_relations)
                .map(|_| Array2::from_shape_simple_fn((width, d), || glorot.sample(&mut rng)))
                .collect(),
        );
        width = d;
    }
    ModelParams { x0, weights }
}

/// Per-layer intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerCache {
    /// `A_r X^(l)` per relation.
    pub messages: Vec<Array2<f64>>,
    /// `X^(l+1) = tanh(sum_r messages_r W_r)`.
    pub output: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub layers: Vec<LayerCache>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.layers.last().expect("at least one layer").output
    }
}

fn check_dims(graph: &KnowledgeGraph, params: &ModelParams) -> Result<()> {
    if params.x0.nrows() != graph.n_nodes() {
        return Err(Error::Dimension(format!(
            "embedding table has {} rows, graph has {} nodes",
            params.x0.nrows(),
            graph.n_nodes()
        )));
    }
    if params.weights.is_empty() {
        return Err(Error::Dimension("model has no layers".into()));
    }
    for (l, layer) in params.weights.iter().enumerate() {
        if layer.len() != graph.n_relations() {
            return Err(Error::Dimension(format!(
                "layer {l} has {} weight matrices, graph has {} relations",
                layer.len(),
                graph.n_relations()
            )));
        }
    }
    params.check_shapes()
}

pub fn forward_cached(graph: &KnowledgeGraph, params: &ModelParams) -> Result<ForwardCache> {
    check_dims(graph, params)?;
    let mut layers: Vec<LayerCache> = Vec::with_capacity(params.n_layers());
    for (l, layer) in params.weights.iter().enumerate() {
        let input = match layers.last() {
            Some(prev) => &prev.output,
            None => &params.x0,
        };
        let mut z = Array2::<f64>::zeros((graph.n_nodes(), layer[0].ncols()));
        let mut messages = Vec::with_capacity(layer.len());
        for ((r, _), w) in graph.relations().iter().zip(layer) {
            let m = graph.adjacency_matvec(*r, input.view())?;
            ndarray::linalg::general_mat_mul(1.0, &m, w, 1.0, &mut z);
            messages.push(m);
        }
        z.mapv_inplace(f64::tanh);
        if let Some((row, _)) = z
            .axis_iter(Axis(0))
            .enumerate()
            .find(|(_, row)| row.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Numeric(format!(
                "non-finite activation at layer {l}, node {}",
                graph.label(NodeId(row))
            )));
        }
        layers.push(LayerCache { messages, output: z });
    }
    Ok(ForwardCache { layers })
}

/// Final-layer node representations `H`.
pub fn forward(graph: &KnowledgeGraph, params: &ModelParams) -> Result<Array2<f64>> {
    let mut cache = forward_cached(graph, params)?;
    Ok(cache.layers.pop().unwrap().output)
}

/// Dot product of two rows of `H`.
pub fn score(h: &Array2<f64>, i: NodeId, j: NodeId) -> f64 {
    dot(h.row(i.0), h.row(j.0))
}

fn dot(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Chain rule from `dL/dH` back to every parameter.
pub fn backward_from_output(
    graph: &KnowledgeGraph,
    params: &ModelParams,
    cache: &ForwardCache,
    d_output: Array2<f64>,
) -> Result<Gradients> {
    let mut grads = params.zeros_like();
    let mut d_out = d_output;
    for l in (0..params.n_layers()).rev() {
        let lc = &cache.layers[l];
        // through tanh
        let mut dz = d_out;
        Zip::from(&mut dz).and(&lc.output).for_each(|g, &h| *g *= 1.0 - h * h);
        let in_width = params.weights[l][0].nrows();
        let mut d_in = Array2::<f64>::zeros((graph.n_nodes(), in_width));
        for (k, (r, _)) in graph.relations().iter().enumerate() {
            let w = &params.weights[l][k];
            ndarray::linalg::general_mat_mul(1.0, &lc.messages[k].t(), &dz, 0.0, &mut grads.weights[l][k]);
            // A_r is symmetric, so A_r^T (dZ W_r^T) = A_r (dZ W_r^T).
            let t = dz.dot(&w.t());
            d_in += &graph.adjacency_matvec(*r, t.view())?;
        }
        d_out = d_in;
    }
    grads.x0 = d_out;
    Ok(grads)
}

/// Adds `coef * (dF/dH)` for `F = H_i . H_j` into `d_h`.
pub(crate) fn accumulate_score_grad(h: &Array2<f64>, d_h: &mut Array2<f64>, (i, j): Pair, coef: f64) {
    if coef == 0.0 {
        return;
    }
    let hi = h.row(i.0).to_owned();
    let hj = h.row(j.0).to_owned();
    d_h.row_mut(i.0).scaled_add(coef, &hj);
    d_h.row_mut(j.0).scaled_add(coef, &hi);
}

/// Batch loss and gradients of the loss with respect to every parameter.
pub fn backward(
    graph: &KnowledgeGraph,
    params: &ModelParams,
    batch: &PairBatch,
    mode: LossMode,
) -> Result<(f64, Gradients)> {
    let cache = forward_cached(graph, params)?;
    let h = cache.output();
    let pos: Vec<f64> = batch.positives.iter().map(|&(i, j)| score(h, i, j)).collect();
    let neg: Vec<f64> = batch.negatives.iter().map(|&(i, j)| score(h, i, j)).collect();
    let lv = batch_loss(mode, &pos, &neg);
    let mut d_h = Array2::<f64>::zeros(h.raw_dim());
    for (&p, &g) in batch.positives.iter().zip(&lv.d_pos) {
        accumulate_score_grad(h, &mut d_h, p, g);
    }
    for (&p, &g) in batch.negatives.iter().zip(&lv.d_neg) {
        accumulate_score_grad(h, &mut d_h, p, g);
    }
    let grads = backward_from_output(graph, params, &cache, d_h)?;
    Ok((lv.loss, grads))
}

/// Gradient of the edge score `H_i . H_j` with respect to the input embeddings.
pub fn score_input_gradient(graph: &KnowledgeGraph, params: &ModelParams, edge: Pair) -> Result<(f64, Array2<f64>)> {
    let cache = forward_cached(graph, params)?;
    let h = cache.output();
    let s = score(h, edge.0, edge.1);
    let mut d_h = Array2::<f64>::zeros(h.raw_dim());
    accumulate_score_grad(h, &mut d_h, edge, 1.0);
    let grads = backward_from_output(graph, params, &cache, d_h)?;
    Ok((s, grads.x0))
}

/// The relational convolution model as a registry entry (`graphix`).
#[derive(Debug, Clone)]
pub struct RelationalGcn {
    config: ModelConfig,
    params: ModelParams,
    relations: Vec<RelationKind>,
}

pub(crate) const ENTRY: ModelEntry = ModelEntry {
    name: "graphix",
    description: "relational graph convolution over learned node embeddings, dot-product score",
    init: |config, graph| {
        let params = init_params(config, graph.n_nodes(), graph.n_relations(), config.seed);
        Ok(Box::new(RelationalGcn::new(config.clone(), params, graph)?))
    },
    restore: |config, graph, tensors| {
        let params = ModelParams::from_tensors(tensors, config.n_layers, graph.n_relations())?;
        Ok(Box::new(RelationalGcn::new(config.clone(), params, graph)?))
    },
};

impl RelationalGcn {
    pub fn new(config: ModelConfig, params: ModelParams, graph: &KnowledgeGraph) -> Result<Self> {
        config.validate()?;
        if params.n_layers() != config.n_layers || params.x0.ncols() != config.embed_dim {
            return Err(Error::Dimension("parameters do not match model config".into()));
        }
        check_dims(graph, &params)?;
        Ok(RelationalGcn {
            config,
            params,
            relations: graph.relation_kinds(),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    fn check_graph(&self, graph: &KnowledgeGraph) -> Result<()> {
        if graph.relation_kinds() != self.relations {
            return Err(Error::InvalidInput(format!(
                "model was built for relations {:?}, graph has {:?}",
                self.relations,
                graph.relation_kinds()
            )));
        }
        if graph.is_normalized() != self.config.normalize_adjacency {
            return Err(Error::InvalidInput(
                "graph normalization differs from model config".into(),
            ));
        }
        Ok(())
    }
}

struct GcnScorer {
    h: Array2<f64>,
}

impl PairScorer for GcnScorer {
    fn score(&self, i: NodeId, j: NodeId) -> f64 {
        score(&self.h, i, j)
    }
}

impl LinkModel for RelationalGcn {
    fn name(&self) -> &'static str {
        ENTRY.name
    }

    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn tensor_names(&self) -> Vec<String> {
        std::iter::once("x0".to_string())
            .chain((0..self.params.n_layers()).flat_map(|l| self.relations.iter().map(move |r| format!("w{l}.{r}"))))
            .collect()
    }

    fn tensors(&self) -> Vec<&Array2<f64>> {
        self.params.tensors()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        self.params.tensors_mut()
    }

    fn prepare_graph<'g>(&self, graph: &'g KnowledgeGraph) -> Cow<'g, KnowledgeGraph> {
        if graph.is_normalized() == self.config.normalize_adjacency {
            Cow::Borrowed(graph)
        } else {
            Cow::Owned(graph.with_normalization(self.config.normalize_adjacency))
        }
    }

    fn scorer<'a>(&'a self, graph: &'a KnowledgeGraph) -> Result<Box<dyn PairScorer + 'a>> {
        self.check_graph(graph)?;
        Ok(Box::new(GcnScorer {
            h: forward(graph, &self.params)?,
        }))
    }

    fn loss_and_grad(
        &self,
        graph: &KnowledgeGraph,
        batch: &PairBatch,
        mode: LossMode,
    ) -> Result<(f64, Vec<Array2<f64>>)> {
        self.check_graph(graph)?;
        let (loss, grads) = backward(graph, &self.params, batch, mode)?;
        Ok((loss, grads.into_tensors()))
    }

    fn node_embeddings(&self) -> ArrayView2<'_, f64> {
        self.params.x0.view()
    }

    fn as_gcn(&self) -> Option<&RelationalGcn> {
        Some(self)
    }
}
