use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub const THREADS_ENV: &str = "KGX_THREADS";

#[derive(Debug, Parser)]
#[command(name = "kgx", about = "Knowledge-graph link prediction with per-node attribution")]
pub struct Cli {
    /// Worker threads; 1 gives byte-reproducible outputs.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,

    /// Repeat for more log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Assemble edge files into a graph bundle.
    Build(BuildArgs),
    /// Train a model on a graph bundle.
    Train(TrainArgs),
    /// Score pairs from a file or rank all unseen pairs.
    Predict(PredictArgs),
    /// Attribute an edge score to the nodes around it.
    Explain(ExplainArgs),
    /// K-fold cross-validation with ROC-AUC and PR-AUC.
    Evaluate(EvaluateArgs),
    /// Check whether the top-attributed gene matches known drug targets.
    ExplainEval(ExplainEvalArgs),
    /// Write learned node features as CSV.
    ExportEmbeddings(ExportArgs),
    /// Write a synthetic planted-mediator dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct BuildArgs {
    /// JSON manifest naming edge files and the target relation.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Graph bundle to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Build report JSON (default: `<out>.report.json`).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Graphix,
    Transe,
    Distmult,
}

impl ModelName {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Graphix => "graphix",
            ModelName::Transe => "transe",
            ModelName::Distmult => "distmult",
        }
    }
}

/// Model and training configuration shared by `train` and `evaluate`.
#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "graphix")]
    pub model: ModelName,
    /// Training configuration JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model configuration JSON.
    #[arg(long)]
    pub model_config: Option<PathBuf>,
    /// Overrides the training configuration.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Overrides the training configuration.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Overrides the model configuration.
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Overrides the model configuration.
    #[arg(long)]
    pub layers: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub seed: u64,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch loss CSV (default: `<out>.loss.csv`).
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CheckpointArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Graph bundle the checkpoint was trained on.
    #[arg(long)]
    pub graph: PathBuf,
    /// Accept a graph whose digest differs from the checkpoint's.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args, Serialize)]
#[command(group(clap::ArgGroup::new("mode").required(true).args(["pairs", "all_novel"])))]
pub struct PredictArgs {
    #[command(flatten)]
    pub input: CheckpointArgs,
    /// TSV of label pairs to score.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Score every target-kind pair that is not a known positive.
    #[arg(long)]
    pub all_novel: bool,
    /// Keep the K best pairs.
    #[arg(long, requires = "all_novel")]
    pub top: Option<usize>,
    /// Apply `--top` per left node instead of overall.
    #[arg(long, requires = "top")]
    pub per_node: bool,
    /// File of node labels (one per line) whose pairs are dropped.
    #[arg(long)]
    pub exclude_nodes: Option<PathBuf>,
    /// Drop pairs whose disease shares a first-level MeSH code with a disease
    /// already linked to the same drug.
    #[arg(long)]
    pub exclude_mesh_synonyms: bool,
    /// MeSH mapping used to average tree-number scores per disease label (`--pairs` only).
    #[arg(long, requires = "pairs")]
    pub mesh_mapping: Option<PathBuf>,
    /// Ranked TSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Unresolved pairs (default: `<out>.skipped.tsv`).
    #[arg(long)]
    pub skipped: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Dot,
    Graphml,
    Json,
}

impl Format {
    pub fn as_str(self) -> &'static str {
        match self {
            Format::Dot => "dot",
            Format::Graphml => "graphml",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub input: CheckpointArgs,
    /// Edge as two comma-separated labels, e.g. `mesh::C04.557,drug::DB00945`.
    #[arg(long)]
    pub edge: String,
    /// Riemann steps along the integration path.
    #[arg(long, default_value_t = 30)]
    pub m: usize,
    #[arg(long, value_enum, default_value = "graphml")]
    pub format: Format,
    /// Attribution report JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Subgraph export (default: `<out stem>.subgraph.<format extension>`).
    #[arg(long)]
    pub export: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Seeds the fold split, negatives and model initialization.
    #[arg(long)]
    pub seed: u64,
    /// Null control: permute which drugs go with which diseases before evaluating.
    #[arg(long)]
    pub shuffle_labels: bool,
    /// Metrics report JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ExplainEvalArgs {
    #[command(flatten)]
    pub input: CheckpointArgs,
    /// TSV: disease, drug, comma-separated target genes.
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub m: usize,
    /// `median` (of known-positive scores), `none`, or a number.
    #[arg(long, default_value = "median")]
    pub threshold: String,
    /// Report JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Table TSV (default: `<out>.tsv`).
    #[arg(long)]
    pub tsv: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExportArgs {
    #[command(flatten)]
    pub input: CheckpointArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// JSON with any of the generator fields; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_disease: Option<usize>,
    #[arg(long)]
    pub n_drug: Option<usize>,
    #[arg(long)]
    pub n_gene: Option<usize>,
    #[arg(long)]
    pub mediator_fraction: Option<f64>,
    /// Extra random edges per relation, as a fraction of its planted edges.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}
