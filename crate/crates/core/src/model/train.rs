use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::loss::LossMode;
use super::optim::{Optimizer, OptimizerKind};
use super::sampling::NegativeSampler;
use super::{Checkpoint, LinkModel, ModelConfig, ModelRegistry, PairBatch};
use crate::error::{Error, Result};
use crate::evaluation::metrics::roc_auc;
use crate::kgraph::{KnowledgeGraph, Pair};

/// Pairs per optimizer step: every positive at once, or fixed-size chunks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BatchSize {
    #[default]
    Full,
    Pairs(usize),
}

impl Serialize for BatchSize {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BatchSize::Full => s.serialize_str("full"),
            BatchSize::Pairs(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for BatchSize {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = BatchSize;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("\"full\" or a positive integer")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<BatchSize, E> {
                match v {
                    "full" => Ok(BatchSize::Full),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<BatchSize, E> {
                if v == 0 {
                    return Err(E::invalid_value(de::Unexpected::Unsigned(v), &self));
                }
                Ok(BatchSize::Pairs(v as usize))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<BatchSize, E> {
                if v <= 0 {
                    return Err(E::invalid_value(de::Unexpected::Signed(v), &self));
                }
                Ok(BatchSize::Pairs(v as usize))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: BatchSize,
    pub resample_negatives_each_epoch: bool,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub early_stop_patience: usize,
    pub validation_fraction: f64,
    pub loss_mode: LossMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: 1e-2,
            optimizer: OptimizerKind::Adam,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: BatchSize::Full,
            resample_negatives_each_epoch: true,
            early_stop_patience: 0,
            validation_fraction: 0.0,
            loss_mode: LossMode::PerPair,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidInput("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidInput("validation_fraction must be in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainStats {
    pub loss_history: Vec<f64>,
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub validation_auc: Option<f64>,
}

/// Training-loop RNG, on a separate ChaCha stream from parameter initialization.
pub(crate) fn train_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Trains `model` in place on `supervision`. Negatives never come from
/// `supervision` or `excluded`.
pub fn train_model(
    model: &mut dyn LinkModel,
    graph: &KnowledgeGraph,
    supervision: &[Pair],
    excluded: &[Pair],
    cfg: &TrainConfig,
) -> Result<TrainStats> {
    cfg.validate()?;
    if supervision.is_empty() {
        return Err(Error::InvalidInput("no positive pairs to train on".into()));
    }
    let graph = model.prepare_graph(graph).into_owned();
    let mut rng = train_rng(model.config().seed);
    let mut sampler = NegativeSampler::new(&graph, supervision.iter().chain(excluded));

    let mut train_pos = supervision.to_vec();
    let mut validation: Option<(Vec<Pair>, Vec<Pair>)> = None;
    if cfg.validation_fraction > 0.0 {
        train_pos.shuffle(&mut rng);
        let n_val = ((cfg.validation_fraction * train_pos.len() as f64).round() as usize).max(1);
        if n_val >= train_pos.len() {
            return Err(Error::InvalidInput(
                "validation split leaves no training positives".into(),
            ));
        }
        let val_pos: Vec<Pair> = train_pos.drain(..n_val).collect();
        let val_neg = sampler.sample(val_pos.len(), &mut rng)?;
        sampler.exclude(&val_neg);
        validation = Some((val_pos, val_neg));
    }

    let mut opt = Optimizer::new(
        cfg.optimizer,
        cfg.learning_rate,
        cfg.adam_beta1,
        cfg.adam_beta2,
        cfg.adam_eps,
    );
    let mut stats = TrainStats::default();
    let mut negatives: Vec<Pair> = Vec::new();
    let mut best: Option<(f64, Vec<ndarray::Array2<f64>>)> = None;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..train_pos.len()).collect();

    for epoch in 0..cfg.epochs {
        if epoch == 0 || cfg.resample_negatives_each_epoch {
            negatives = sampler.sample(train_pos.len(), &mut rng)?;
        }
        let chunk = match cfg.batch_size {
            BatchSize::Full => order.len(),
            BatchSize::Pairs(n) => {
                order.shuffle(&mut rng);
                n
            }
        };
        let mut epoch_loss = 0.0;
        for idx in order.chunks(chunk) {
            let batch = PairBatch {
                positives: idx.iter().map(|&k| train_pos[k]).collect(),
                negatives: idx.iter().map(|&k| negatives[k]).collect(),
            };
            let (loss, grads) = model.loss_and_grad(&graph, &batch, cfg.loss_mode)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("non-finite loss at epoch {epoch}")));
            }
            opt.step(model.tensors_mut(), &grads);
            model.after_step();
            epoch_loss += loss * idx.len() as f64;
        }
        stats.loss_history.push(epoch_loss / order.len() as f64);
        stats.epochs_run = epoch + 1;

        if let Some((vp, vn)) = &validation {
            let scorer = model.scorer(&graph)?;
            let mut scores = scorer.score_pairs(vp);
            scores.extend(scorer.score_pairs(vn));
            drop(scorer);
            let labels: Vec<bool> = (0..scores.len()).map(|k| k < vp.len()).collect();
            let auc = roc_auc(&scores, &labels)?;
            let improved = best.as_ref().is_none_or(|(b, _)| auc > *b);
            if improved {
                best = Some((auc, model.tensors().into_iter().cloned().collect()));
                stats.best_epoch = Some(epoch);
                since_best = 0;
            } else {
                since_best += 1;
                if cfg.early_stop_patience > 0 && since_best >= cfg.early_stop_patience {
                    log::info!("early stop at epoch {epoch}, best validation ROC-AUC {auc:.4}");
                    break;
                }
            }
        }
    }
    if let Some((auc, tensors)) = best {
        for (dst, src) in model.tensors_mut().into_iter().zip(tensors) {
            *dst = src;
        }
        stats.validation_auc = Some(auc);
    }
    Ok(stats)
}

/// Initializes the named model and trains it on all positives of `graph`.
pub fn train(
    registry: &ModelRegistry,
    model_name: &str,
    graph: &KnowledgeGraph,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<Checkpoint> {
    if graph.positives().is_empty() {
        return Err(Error::InvalidInput("graph has no positive pairs".into()));
    }
    let mut model = registry.init(model_name, model_config, graph)?;
    let stats = train_model(model.as_mut(), graph, graph.positives(), &[], train_config)?;
    Ok(Checkpoint::from_model(
        model.as_ref(),
        train_config.clone(),
        graph.digest(),
        stats.epochs_run,
        stats.loss_history,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_size_json() {
        let full: BatchSize = serde_json::from_str("\"full\"").unwrap();
        assert_eq!(full, BatchSize::Full);
        let n: BatchSize = serde_json::from_str("32").unwrap();
        assert_eq!(n, BatchSize::Pairs(32));
        assert!(serde_json::from_str::<BatchSize>("0").is_err());
        assert_eq!(serde_json::to_string(&BatchSize::Pairs(8)).unwrap(), "8");
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
        c.learning_rate = 0.1;
        c.validation_fraction = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn partial_json_uses_defaults() {
        let c: TrainConfig = serde_json::from_str(r#"{"epochs": 3, "loss_mode": {"kind": "literal_sum"}}"#).unwrap();
        assert_eq!(c.epochs, 3);
        assert_eq!(c.loss_mode, LossMode::LiteralSum);
        assert_eq!(c.learning_rate, 1e-2);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"epoch": 3}"#).is_err());
    }
}
