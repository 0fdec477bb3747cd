//! Translational (TransE, L1) and bilinear-diagonal (DistMult) baselines with a
//! single relation vector. They score target pairs only and ignore message passing.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kgraph::{KnowledgeGraph, NodeId};
use crate::model::loss::batch_loss;
use crate::model::{LinkModel, LossMode, ModelConfig, ModelEntry, PairBatch, PairScorer};

/// `||h + r - t||_1`.
pub fn transe_distance(h: ArrayView1<'_, f64>, r: ArrayView1<'_, f64>, t: ArrayView1<'_, f64>) -> f64 {
    h.iter()
        .zip(r.iter())
        .zip(t.iter())
        .map(|((h, r), t)| (h + r - t).abs())
        .sum()
}

/// Negated L1 distance, so that higher means more plausible.
pub fn transe_score(h: ArrayView1<'_, f64>, r: ArrayView1<'_, f64>, t: ArrayView1<'_, f64>) -> f64 {
    -transe_distance(h, r, t)
}

/// `sum_d h_d r_d t_d`.
pub fn distmult_score(h: ArrayView1<'_, f64>, r: ArrayView1<'_, f64>, t: ArrayView1<'_, f64>) -> f64 {
    h.iter().zip(r.iter()).zip(t.iter()).map(|((h, r), t)| h * r * t).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TripletKind {
    TransE,
    DistMult,
}

/// Entity table (N x C) and one relation vector (stored 1 x C).
#[derive(Debug, Clone, PartialEq)]
pub struct TripletParams {
    pub entities: Array2<f64>,
    pub relation: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct TripletModel {
    kind: TripletKind,
    config: ModelConfig,
    params: TripletParams,
}

fn normalize_rows(m: &mut Array2<f64>) {
    for mut row in m.axis_iter_mut(Axis(0)) {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }
}

impl TripletModel {
    pub fn init(kind: TripletKind, config: &ModelConfig, n_nodes: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let c = config.embed_dim;
        let bound = match kind {
            TripletKind::TransE => 6.0 / (c as f64).sqrt(),
            TripletKind::DistMult => 1.0 / (c as f64).sqrt(),
        };
        let u = Uniform::new_inclusive(-bound, bound);
        let mut entities = Array2::from_shape_simple_fn((n_nodes, c), || u.sample(&mut rng));
        let mut relation = Array2::from_shape_simple_fn((1, c), || u.sample(&mut rng));
        if kind == TripletKind::TransE {
            normalize_rows(&mut entities);
            normalize_rows(&mut relation);
        }
        TripletModel {
            kind,
            config: config.clone(),
            params: TripletParams { entities, relation },
        }
    }

    pub fn from_params(kind: TripletKind, config: &ModelConfig, params: TripletParams) -> Result<Self> {
        if params.relation.nrows() != 1 || params.relation.ncols() != params.entities.ncols() {
            return Err(Error::Dimension("relation vector must be 1 x C".into()));
        }
        Ok(TripletModel {
            kind,
            config: config.clone(),
            params,
        })
    }

    pub fn params(&self) -> &TripletParams {
        &self.params
    }

    fn pair_score(&self, i: NodeId, j: NodeId) -> f64 {
        let h = self.params.entities.row(i.0);
        let t = self.params.entities.row(j.0);
        let r = self.params.relation.row(0);
        match self.kind {
            TripletKind::TransE => transe_score(h, r, t),
            TripletKind::DistMult => distmult_score(h, r, t),
        }
    }

    /// Adds `coef * d(score)/d(params)` for one pair.
    fn accumulate(&self, (i, j): (NodeId, NodeId), coef: f64, d_ent: &mut Array2<f64>, d_rel: &mut Array2<f64>) {
        if coef == 0.0 {
            return;
        }
        let h = self.params.entities.row(i.0);
        let t = self.params.entities.row(j.0);
        let r = self.params.relation.row(0);
        let c = h.len();
        for d in 0..c {
            let (gh, gr, gt) = match self.kind {
                TripletKind::TransE => {
                    // d(-|u|)/du = -sign(u), u = h + r - t
                    let s = -signum0(h[d] + r[d] - t[d]);
                    (s, s, -s)
                }
                TripletKind::DistMult => (r[d] * t[d], h[d] * t[d], h[d] * r[d]),
            };
            d_ent[[i.0, d]] += coef * gh;
            d_ent[[j.0, d]] += coef * gt;
            d_rel[[0, d]] += coef * gr;
        }
    }
}

fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

struct TripletScorer<'a>(&'a TripletModel);

impl PairScorer for TripletScorer<'_> {
    fn score(&self, i: NodeId, j: NodeId) -> f64 {
        self.0.pair_score(i, j)
    }
}

impl LinkModel for TripletModel {
    fn name(&self) -> &'static str {
        match self.kind {
            TripletKind::TransE => TRANSE_ENTRY.name,
            TripletKind::DistMult => DISTMULT_ENTRY.name,
        }
    }

    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn tensor_names(&self) -> Vec<String> {
        vec!["entities".into(), "relation".into()]
    }

    fn tensors(&self) -> Vec<&Array2<f64>> {
        vec![&self.params.entities, &self.params.relation]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        vec![&mut self.params.entities, &mut self.params.relation]
    }

    fn scorer<'a>(&'a self, graph: &'a KnowledgeGraph) -> Result<Box<dyn PairScorer + 'a>> {
        if graph.n_nodes() != self.params.entities.nrows() {
            return Err(Error::Dimension(format!(
                "model has {} entities, graph has {} nodes",
                self.params.entities.nrows(),
                graph.n_nodes()
            )));
        }
        Ok(Box::new(TripletScorer(self)))
    }

    fn loss_and_grad(
        &self,
        graph: &KnowledgeGraph,
        batch: &PairBatch,
        mode: LossMode,
    ) -> Result<(f64, Vec<Array2<f64>>)> {
        let scorer = self.scorer(graph)?;
        let pos = scorer.score_pairs(&batch.positives);
        let neg = scorer.score_pairs(&batch.negatives);
        let lv = batch_loss(mode, &pos, &neg);
        let mut d_ent = Array2::zeros(self.params.entities.raw_dim());
        let mut d_rel = Array2::zeros(self.params.relation.raw_dim());
        for (&p, &g) in batch.positives.iter().zip(&lv.d_pos) {
            self.accumulate(p, g, &mut d_ent, &mut d_rel);
        }
        for (&p, &g) in batch.negatives.iter().zip(&lv.d_neg) {
            self.accumulate(p, g, &mut d_ent, &mut d_rel);
        }
        Ok((lv.loss, vec![d_ent, d_rel]))
    }

    fn after_step(&mut self) {
        if self.kind == TripletKind::TransE {
            normalize_rows(&mut self.params.entities);
        }
    }

    fn node_embeddings(&self) -> ArrayView2<'_, f64> {
        self.params.entities.view()
    }
}

fn restore(
    kind: TripletKind,
    config: &ModelConfig,
    graph: &KnowledgeGraph,
    tensors: Vec<Array2<f64>>,
) -> Result<Box<dyn LinkModel>> {
    let [entities, relation]: [Array2<f64>; 2] = tensors
        .try_into()
        .map_err(|_| Error::Format("triplet model expects 2 tensors".into()))?;
    if entities.nrows() != graph.n_nodes() {
        return Err(Error::Dimension("entity table does not match graph".into()));
    }
    Ok(Box::new(TripletModel::from_params(
        kind,
        config,
        TripletParams { entities, relation },
    )?))
}

pub(crate) const TRANSE_ENTRY: ModelEntry = ModelEntry {
    name: "transe",
    description: "TransE, L1 distance, single relation vector, unit-norm entities",
    init: |config, graph| {
        Ok(Box::new(TripletModel::init(
            TripletKind::TransE,
            config,
            graph.n_nodes(),
        )))
    },
    restore: |config, graph, tensors| restore(TripletKind::TransE, config, graph, tensors),
};

pub(crate) const DISTMULT_ENTRY: ModelEntry = ModelEntry {
    name: "distmult",
    description: "DistMult, trilinear dot product, single relation vector",
    init: |config, graph| {
        Ok(Box::new(TripletModel::init(
            TripletKind::DistMult,
            config,
            graph.n_nodes(),
        )))
    },
    restore: |config, graph, tensors| restore(TripletKind::DistMult, config, graph, tensors),
};

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn transe_fixtures() {
        let d = transe_distance(
            array![0.0, 0.0].view(),
            array![1.0, 0.0].view(),
            array![1.0, 0.0].view(),
        );
        assert_eq!(d, 0.0);
        assert_eq!(
            transe_score(
                array![0.0, 0.0].view(),
                array![1.0, 0.0].view(),
                array![1.0, 0.0].view()
            ),
            0.0
        );
        let d = transe_distance(
            array![1.0, 1.0].view(),
            array![0.0, 0.0].view(),
            array![0.0, 0.0].view(),
        );
        assert_eq!(d, 2.0);
    }

    #[test]
    fn distmult_fixtures() {
        assert_eq!(
            distmult_score(
                array![1.0, 2.0].view(),
                array![1.0, 1.0].view(),
                array![1.0, 1.0].view()
            ),
            3.0
        );
        assert_eq!(
            distmult_score(
                array![5.0, -2.0].view(),
                array![0.0, 0.0].view(),
                array![3.0, 9.0].view()
            ),
            0.0
        );
    }

    proptest! {
        #[test]
        fn distmult_head_tail_symmetric(v in prop::collection::vec(-3.0f64..3.0, 12)) {
            let h = ndarray::Array1::from(v[0..4].to_vec());
            let r = ndarray::Array1::from(v[4..8].to_vec());
            let t = ndarray::Array1::from(v[8..12].to_vec());
            let (a, b) = (distmult_score(h.view(), r.view(), t.view()), distmult_score(t.view(), r.view(), h.view()));
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn transe_zero_iff_exact_translation(v in prop::collection::vec(-3.0f64..3.0, 8)) {
            let h = ndarray::Array1::from(v[0..4].to_vec());
            let r = ndarray::Array1::from(v[4..8].to_vec());
            let t = &h + &r;
            prop_assert_eq!(transe_distance(h.view(), r.view(), t.view()), 0.0);
            let mut t2 = t.clone();
            t2[0] += 0.5;
            prop_assert!(transe_distance(h.view(), r.view(), t2.view()) > 0.0);
        }

        #[test]
        fn transe_matches_direct_sum(v in prop::collection::vec(-3.0f64..3.0, 15)) {
            let h = ndarray::Array1::from(v[0..5].to_vec());
            let r = ndarray::Array1::from(v[5..10].to_vec());
            let t = ndarray::Array1::from(v[10..15].to_vec());
            let mut direct = 0.0;
            for k in 0..5 {
                direct += (h[k] + r[k] - t[k]).abs();
            }
            prop_assert!((transe_distance(h.view(), r.view(), t.view()) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn transe_distance_not_symmetric_unless_r_zero() {
        let h = array![1.0, 0.0];
        let t = array![0.0, 2.0];
        let r = array![0.5, 0.0];
        assert_ne!(
            transe_distance(h.view(), r.view(), t.view()),
            transe_distance(t.view(), r.view(), h.view())
        );
        let z = array![0.0, 0.0];
        assert_eq!(
            transe_distance(h.view(), z.view(), t.view()),
            transe_distance(t.view(), z.view(), h.view())
        );
    }

    #[test]
    fn transe_entities_unit_norm_after_init() {
        let m = TripletModel::init(
            TripletKind::TransE,
            &ModelConfig {
                embed_dim: 8,
                ..Default::default()
            },
            5,
        );
        for row in m.params().entities.axis_iter(Axis(0)) {
            assert!((row.dot(&row) - 1.0).abs() < 1e-12);
        }
    }
}
