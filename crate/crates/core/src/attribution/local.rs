//! Edge score restricted to the rows that can influence it.
//!
//! With `L` layers only the endpoints are needed at the output, their neighbours
//! one layer down, and so on, so the score depends on the input embeddings of the
//! `L`-hop ball only. Forward and backward passes here touch just those rows, which
//! makes the many small gradient evaluations of path integration cheap.

use std::collections::{BTreeSet, HashMap};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::kgraph::{KnowledgeGraph, NodeId, Pair, RelationKind};
use crate::model::ModelParams;

#[derive(Debug, Clone)]
pub struct LocalEdgeModel {
    nodes: Vec<NodeId>,
    endpoints: (usize, usize),
    /// `rows[l]`: local rows needed at depth `l` (0 = input, `L` = output).
    rows: Vec<Vec<usize>>,
    /// Per relation, per local row: `(local neighbour, weight)`; filled for rows
    /// that are ever computed above the input layer.
    adj: Vec<Vec<Vec<(usize, f64)>>>,
    x0: Array2<f64>,
    weights: Vec<Vec<Array2<f64>>>,
}

impl LocalEdgeModel {
    /// `graph` must be the view the model scores on (already normalized if the
    /// model expects it).
    pub fn new(graph: &KnowledgeGraph, params: &ModelParams, edge: Pair) -> Result<Self> {
        let n_layers = params.n_layers();
        if params.x0.nrows() != graph.n_nodes() {
            return Err(Error::Dimension(format!(
                "embedding table has {} rows, graph has {} nodes",
                params.x0.nrows(),
                graph.n_nodes()
            )));
        }
        if params.weights.iter().any(|layer| layer.len() != graph.n_relations()) {
            return Err(Error::Dimension("weight count differs from graph relations".into()));
        }
        // Needed global rows per depth, from the output downwards.
        let mut needed: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_layers + 1];
        needed[n_layers] = [edge.0 .0, edge.1 .0].into_iter().collect();
        for l in (0..n_layers).rev() {
            let mut set = needed[l + 1].clone();
            for &v in &needed[l + 1] {
                set.extend(graph.neighbors(NodeId(v)).into_iter().map(|n| n.0));
            }
            needed[l] = set;
        }
        let nodes: Vec<NodeId> = needed[0].iter().map(|&v| NodeId(v)).collect();
        let local: HashMap<usize, usize> = needed[0].iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let rows: Vec<Vec<usize>> = needed.iter().map(|s| s.iter().map(|v| local[v]).collect()).collect();

        let computed: BTreeSet<usize> = needed[1..].iter().flatten().copied().collect();
        let adj = graph
            .relations()
            .iter()
            .map(|(r, csr)| {
                let mut per_row = vec![Vec::new(); nodes.len()];
                for &v in &computed {
                    per_row[local[&v]] = if *r == RelationKind::SelfLoop {
                        vec![(local[&v], 1.0)]
                    } else {
                        csr.row(v).map(|(w, a)| (local[&w], a)).collect()
                    };
                }
                per_row
            })
            .collect();
        let x0 = params
            .x0
            .select(ndarray::Axis(0), &needed[0].iter().copied().collect::<Vec<_>>());
        Ok(LocalEdgeModel {
            nodes,
            endpoints: (local[&edge.0 .0], local[&edge.1 .0]),
            rows,
            adj,
            x0,
            weights: params.weights.clone(),
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Global ids of the local rows, ascending.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn features(&self, local: usize) -> ndarray::ArrayView1<'_, f64> {
        self.x0.row(local)
    }

    pub fn score(&self) -> f64 {
        self.evaluate(&self.x0).0
    }

    /// Score and its gradient with respect to every local input row.
    pub fn score_and_gradient(&self) -> (f64, Array2<f64>) {
        self.evaluate(&self.x0)
    }

    /// Gradient with respect to row `local` when that row is replaced by
    /// `alpha * x_local` and all others keep their values.
    pub fn scaled_input_gradient(&self, local: usize, alpha: f64) -> Vec<f64> {
        let mut x = self.x0.clone();
        x.row_mut(local).mapv_inplace(|v| v * alpha);
        let (_, g) = self.evaluate(&x);
        g.row(local).to_vec()
    }

    /// `sum_{s=1..steps} grad_u f(x with row u scaled by s/steps)`.
    pub fn path_gradient_sum(&self, local: usize, steps: usize) -> Vec<f64> {
        if self.weights.len() == 1 && self.endpoints.0 != self.endpoints.1 {
            return self.path_gradient_sum_single_layer(local, steps);
        }
        let mut acc = vec![0.0; self.x0.ncols()];
        for s in 1..=steps {
            let g = self.scaled_input_gradient(local, s as f64 / steps as f64);
            for (a, v) in acc.iter_mut().zip(g) {
                *a += v;
            }
        }
        acc
    }

    /// One layer: scaling row `u` by `alpha` moves each endpoint pre-activation by
    /// `(alpha - 1) * sum_r a_vu x_u W_r`, so every path step is two small mat-vecs.
    fn path_gradient_sum_single_layer(&self, u: usize, steps: usize) -> Vec<f64> {
        let layer = &self.weights[0];
        let (c, d) = layer[0].dim();
        let (i, j) = self.endpoints;
        let xu = self.x0.row(u);
        let mut pre = [Array1::<f64>::zeros(d), Array1::<f64>::zeros(d)];
        let mut shift = [Array1::<f64>::zeros(d), Array1::<f64>::zeros(d)];
        let mut back = [Array2::<f64>::zeros((c, d)), Array2::<f64>::zeros((c, d))];
        for (k, v) in [i, j].into_iter().enumerate() {
            for (r, w) in layer.iter().enumerate() {
                let mut agg = Array1::<f64>::zeros(c);
                let mut a_vu = 0.0;
                for &(n, a) in &self.adj[r][v] {
                    agg.scaled_add(a, &self.x0.row(n));
                    if n == u {
                        a_vu += a;
                    }
                }
                pre[k] += &agg.dot(w);
                if a_vu != 0.0 {
                    shift[k].scaled_add(a_vu, &xu.dot(w));
                    back[k].scaled_add(a_vu, w);
                }
            }
        }
        let mut acc = Array1::<f64>::zeros(c);
        for s in 1..=steps {
            let beta = 1.0 - s as f64 / steps as f64;
            let h: Vec<Array1<f64>> = (0..2)
                .map(|k| (&pre[k] - &(&shift[k] * beta)).mapv(f64::tanh))
                .collect();
            for k in 0..2 {
                let dz: Array1<f64> = h[1 - k].iter().zip(&h[k]).map(|(g, hv)| g * (1.0 - hv * hv)).collect();
                acc += &back[k].dot(&dz);
            }
        }
        acc.to_vec()
    }

    pub fn evaluate(&self, x0: &Array2<f64>) -> (f64, Array2<f64>) {
        let n = self.nodes.len();
        let n_layers = self.weights.len();
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(n_layers + 1);
        acts.push(x0.clone());
        for l in 0..n_layers {
            let prev = &acts[l];
            let width_out = self.weights[l][0].ncols();
            let mut out = Array2::<f64>::zeros((n, width_out));
            for &v in &self.rows[l + 1] {
                let mut z = Array1::<f64>::zeros(width_out);
                for (r, w) in self.weights[l].iter().enumerate() {
                    let nbrs = &self.adj[r][v];
                    if nbrs.is_empty() {
                        continue;
                    }
                    let mut agg = Array1::<f64>::zeros(prev.ncols());
                    for &(u, a) in nbrs {
                        agg.scaled_add(a, &prev.row(u));
                    }
                    z += &agg.dot(w);
                }
                out.row_mut(v).assign(&z.mapv(f64::tanh));
            }
            acts.push(out);
        }
        let h = &acts[n_layers];
        let (i, j) = self.endpoints;
        let score = h.row(i).dot(&h.row(j));

        let mut d = Array2::<f64>::zeros(h.raw_dim());
        d.row_mut(i).scaled_add(1.0, &h.row(j));
        d.row_mut(j).scaled_add(1.0, &h.row(i));
        for l in (0..n_layers).rev() {
            let out = &acts[l + 1];
            let mut d_prev = Array2::<f64>::zeros(acts[l].raw_dim());
            for &v in &self.rows[l + 1] {
                let dz: Array1<f64> = d
                    .row(v)
                    .iter()
                    .zip(out.row(v))
                    .map(|(g, h)| g * (1.0 - h * h))
                    .collect();
                for (r, w) in self.weights[l].iter().enumerate() {
                    let nbrs = &self.adj[r][v];
                    if nbrs.is_empty() {
                        continue;
                    }
                    let g = w.dot(&dz);
                    for &(u, a) in nbrs {
                        d_prev.row_mut(u).scaled_add(a, &g);
                    }
                }
            }
            d = d_prev;
        }
        (score, d)
    }
}
