//! Cross-validation, ranking metrics, synthetic benchmarks and explanation checks.

pub mod cv;
pub mod explain;
pub mod inference;
pub mod metrics;
pub mod synthetic;

pub use cv::{cross_validate, make_folds, shuffle_positive_labels, CvReport, FoldOutcome, FoldPlan, ModelSpec};
pub use explain::{
    explainability_eval, parse_records, read_records, EvalRecord, ExplainEvalConfig, ExplainSummary, PositiveThreshold,
    SkippedRecord, TargetRecord,
};
pub use inference::{export_embeddings, mesh_averaged_scores, novel_pairs, top_k, MeshSynonymFilter};
pub use metrics::{pr_auc, roc_auc, MetricResult, Summary};
pub use synthetic::{generate_synthetic, PlantedTruth, SyntheticGraph, SyntheticSpec};
