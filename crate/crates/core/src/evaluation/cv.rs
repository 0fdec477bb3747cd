use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{pr_auc, roc_auc, MetricResult};
use crate::error::{Error, Result};
use crate::kgraph::{KnowledgeGraph, Pair};
use crate::model::{train_model, ModelConfig, ModelRegistry, NegativeSampler, TrainConfig};

/// Assignment of each positive (by index) to a fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub seed: u64,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn fold_indices(&self, k: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == k)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_folds];
        for &a in &self.assignments {
            s[a] += 1;
        }
        s
    }
}

/// Uniform random partition with fold sizes differing by at most one; lower folds
/// take the remainder.
pub fn make_folds(positives: &[Pair], n_folds: usize, seed: u64) -> Result<FoldPlan> {
    if n_folds == 0 || n_folds > positives.len() {
        return Err(Error::InvalidInput(format!(
            "cannot split {} positives into {} folds",
            positives.len(),
            n_folds
        )));
    }
    let mut order: Vec<usize> = (0..positives.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignments = vec![0; positives.len()];
    for (pos, &i) in order.iter().enumerate() {
        assignments[i] = pos % n_folds;
    }
    Ok(FoldPlan {
        n_folds,
        seed,
        assignments,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub roc_auc: f64,
    pub pr_auc: f64,
    pub epochs_run: usize,
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub model: String,
    pub folds: Vec<FoldOutcome>,
    pub metrics: MetricResult,
}

/// Model name plus its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub config: ModelConfig,
}

fn eval_rng(seed: u64, fold: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (fold as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(2);
    rng
}

/// Scores one fold's held-out positives against an equal number of fresh negatives,
/// after training on the remaining positives.
fn run_fold(
    graph: &KnowledgeGraph,
    registry: &ModelRegistry,
    spec: &ModelSpec,
    train_config: &TrainConfig,
    plan: &FoldPlan,
    k: usize,
) -> Result<FoldOutcome> {
    let positives = graph.positives();
    let test_list = plan.fold_indices(k);
    let test_idx: HashSet<usize> = test_list.iter().copied().collect();
    let test_pos: Vec<Pair> = test_list.iter().map(|&i| positives[i]).collect();
    let train_pos: Vec<Pair> = (0..positives.len())
        .filter(|i| !test_idx.contains(i))
        .map(|i| positives[i])
        .collect();

    let sampler = NegativeSampler::new(graph, positives);
    let test_neg = sampler.sample(test_pos.len(), &mut eval_rng(plan.seed, k))?;

    let mut config = spec.config.clone();
    config.seed = config.seed.wrapping_add(k as u64);
    let mut model = registry.init(&spec.name, &config, graph)?;
    let stats = train_model(model.as_mut(), graph, &train_pos, &test_neg, train_config)?;

    let mut pairs = test_pos.clone();
    pairs.extend_from_slice(&test_neg);
    let scores = model.score_pairs(graph, &pairs)?;
    let labels: Vec<bool> = (0..pairs.len()).map(|i| i < test_pos.len()).collect();
    Ok(FoldOutcome {
        fold: k,
        n_train: train_pos.len(),
        n_test: test_pos.len(),
        roc_auc: roc_auc(&scores, &labels)?,
        pr_auc: pr_auc(&scores, &labels)?,
        epochs_run: stats.epochs_run,
        final_loss: stats.loss_history.last().copied(),
    })
}

pub fn cross_validate(
    graph: &KnowledgeGraph,
    registry: &ModelRegistry,
    spec: &ModelSpec,
    train_config: &TrainConfig,
    plan: &FoldPlan,
) -> Result<CvReport> {
    if plan.assignments.len() != graph.positives().len() {
        return Err(Error::InvalidInput(
            "fold plan does not match the graph's positives".into(),
        ));
    }
    let mut folds = Vec::with_capacity(plan.n_folds);
    for k in 0..plan.n_folds {
        let outcome = run_fold(graph, registry, spec, train_config, plan, k).map_err(|e| Error::Fold {
            fold: k,
            source: Box::new(e),
        })?;
        log::info!("fold {k}: ROC-AUC {:.4}, PR-AUC {:.4}", outcome.roc_auc, outcome.pr_auc);
        folds.push(outcome);
    }
    let metrics = MetricResult::from_folds(
        folds.iter().map(|f| f.roc_auc).collect(),
        folds.iter().map(|f| f.pr_auc).collect(),
    );
    Ok(CvReport {
        model: spec.name.clone(),
        folds,
        metrics,
    })
}

/// Null-model control: the right endpoints of the positives are permuted, keeping
/// every node's positive degree but destroying which pairs go together.
pub fn shuffle_positive_labels(graph: &KnowledgeGraph, seed: u64) -> KnowledgeGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rights: Vec<_> = graph.positives().iter().map(|p| p.1).collect();
    rights.shuffle(&mut rng);
    let mut seen = HashSet::new();
    let shuffled = graph
        .positives()
        .iter()
        .zip(rights)
        .map(|(p, r)| (p.0, r))
        .filter(|p| p.0 != p.1 && seen.insert(*p))
        .collect();
    graph.with_positives(shuffled)
}
