use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use kgx_core::attribution::{integrated_gradients, AttributionRequest, ExporterRegistry, SubgraphView};
use kgx_core::evaluation::{
    cross_validate, explainability_eval, export_embeddings, generate_synthetic, make_folds, mesh_averaged_scores,
    novel_pairs, read_records, shuffle_positive_labels, top_k, ExplainEvalConfig, MeshSynonymFilter, ModelSpec,
    PositiveThreshold, SyntheticSpec,
};
use kgx_core::kgraph::mesh::MeshMapping;
use kgx_core::kgraph::{build_graph, read_bundle, write_bundle, BuildManifest, KnowledgeGraph, NodeId, NodeKind, Pair};
use kgx_core::model::{train, Checkpoint, LinkModel, ModelConfig, ModelRegistry, TrainConfig};
use kgx_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::args::*;
use crate::run_manifest::RunRecorder;

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn config_echo<T: Serialize>(args: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(args)?)
}

/// Flags override the JSON files, which override the defaults.
fn resolve_configs(args: &ModelArgs, seed: u64) -> Result<(ModelConfig, TrainConfig)> {
    let mut model: ModelConfig = match &args.model_config {
        Some(p) => read_json(p)?,
        None => ModelConfig::default(),
    };
    let mut train: TrainConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    model.seed = seed;
    if let Some(d) = args.embed_dim {
        model.embed_dim = d;
        model.out_dim = d;
    }
    if let Some(l) = args.layers {
        model.n_layers = l;
    }
    if let Some(e) = args.epochs {
        train.epochs = e;
    }
    if let Some(lr) = args.lr {
        train.learning_rate = lr;
    }
    model.validate()?;
    train.validate()?;
    Ok((model, train))
}

pub fn build(args: &BuildArgs) -> Result<()> {
    let (manifest, base) = BuildManifest::load(&args.manifest)?;
    let (graph, report) = build_graph(&manifest, &base)?;
    write_bundle(&graph, &args.out)?;
    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| with_suffix(&args.out, ".report.json"));
    write_json(&report_path, &report)?;
    log::info!(
        "graph: {} nodes, {} positives, digest {}",
        graph.n_nodes(),
        graph.positives().len(),
        report.graph_digest
    );
    let mut run = RunRecorder::new("build", config_echo(args)?);
    run.inputs.push(args.manifest.clone());
    run.inputs.extend(manifest.inputs(&base));
    run.outputs = vec![args.out.clone(), report_path];
    run.write(&args.out)?;
    Ok(())
}

pub fn train_cmd(args: &TrainArgs) -> Result<()> {
    let graph = read_bundle(&args.graph)?;
    let (model_config, train_config) = resolve_configs(&args.model, args.seed)?;
    let registry = ModelRegistry::builtin();
    let ck = train(
        &registry,
        args.model.model.as_str(),
        &graph,
        &model_config,
        &train_config,
    )?;
    ck.save(&args.out)?;
    let loss_path = args
        .loss_csv
        .clone()
        .unwrap_or_else(|| with_suffix(&args.out, ".loss.csv"));
    let mut csv = String::from("epoch,loss\n");
    for (e, l) in ck.loss_history.iter().enumerate() {
        let _ = writeln!(csv, "{},{l:e}", e + 1);
    }
    write_text(&loss_path, &csv)?;
    if let Some(l) = ck.loss_history.last() {
        log::info!("trained {} epochs, final loss {l:.6}", ck.epoch);
    }
    let mut run = RunRecorder::new(
        "train",
        serde_json::json!({ "args": config_echo(args)?, "model_config": model_config, "train_config": train_config }),
    );
    run.seed = Some(args.seed);
    run.inputs = [
        Some(args.graph.clone()),
        args.model.config.clone(),
        args.model.model_config.clone(),
    ]
    .into_iter()
    .flatten()
    .collect();
    run.outputs = vec![args.out.clone(), loss_path];
    run.write(&args.out)?;
    Ok(())
}

struct Loaded {
    graph: KnowledgeGraph,
    model: Box<dyn LinkModel>,
}

fn load_model(input: &CheckpointArgs) -> Result<Loaded> {
    let graph = read_bundle(&input.graph)?;
    let ck = Checkpoint::load(&input.checkpoint)?;
    ck.verify_graph(&graph, input.force)?;
    let model = ModelRegistry::builtin().restore(&ck, &graph)?;
    Ok(Loaded { graph, model })
}

fn resolve_kind(graph: &KnowledgeGraph, label: &str, kind: NodeKind) -> Option<NodeId> {
    graph.resolve(label, Some(kind)).filter(|&n| graph.kind(n) == kind)
}

fn read_label_list(path: &Path) -> Result<BTreeSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

fn format_rows(rows: &[(String, String, f64)]) -> String {
    let mut s = String::from("left\tright\tscore\n");
    for (a, b, score) in rows {
        let _ = writeln!(s, "{a}\t{b}\t{score:e}");
    }
    s
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    let Loaded { graph, model } = load_model(&args.input)?;
    let (lk, rk) = graph.target_kinds();
    let excluded: HashSet<NodeId> = match &args.exclude_nodes {
        Some(p) => read_label_list(p)?
            .iter()
            .filter_map(|l| {
                let n = graph.resolve(l, None);
                if n.is_none() {
                    log::warn!("excluded label {l} is not in the graph");
                }
                n
            })
            .collect(),
        None => HashSet::new(),
    };
    let synonyms = args.exclude_mesh_synonyms.then(|| MeshSynonymFilter::new(&graph));
    let keep = |p: Pair| {
        !excluded.contains(&p.0) && !excluded.contains(&p.1) && !synonyms.as_ref().is_some_and(|f| f.is_synonymous(p))
    };

    let mut skipped = String::from("line\tleft\tright\treason\n");
    let mut n_skipped = 0;
    let rows: Vec<(String, String, f64)> = if let Some(pairs_path) = &args.pairs {
        let mapping = args.mesh_mapping.as_deref().map(MeshMapping::load).transpose()?;
        let lines = kgx_core::kgraph::read_label_pairs(pairs_path)?;
        // (line, left label, right label, left nodes to average over, right node)
        let mut requests: Vec<(usize, String, String, Vec<NodeId>, NodeId)> = Vec::new();
        for (line, a, b) in lines {
            let right = resolve_kind(&graph, &b, rk);
            let lefts: Vec<NodeId> = match resolve_kind(&graph, &a, lk) {
                Some(n) => vec![n],
                None => mapping
                    .as_ref()
                    .and_then(|m| m.get(a.strip_prefix("disease::").unwrap_or(&a)))
                    .map(|codes| codes.iter().filter_map(|c| graph.node(&c.node_label())).collect())
                    .unwrap_or_default(),
            };
            let reason = match (lefts.is_empty(), right) {
                (true, _) => Some(format!("unknown {} label", lk.as_str())),
                (false, None) => Some(format!("unknown {} label", rk.as_str())),
                _ => None,
            };
            if let Some(reason) = reason {
                log::warn!("line {line}: {a} / {b}: {reason}");
                let _ = writeln!(skipped, "{line}\t{a}\t{b}\t{reason}");
                n_skipped += 1;
                continue;
            }
            let right = right.unwrap();
            let lefts: Vec<NodeId> = lefts.into_iter().filter(|&l| keep((l, right))).collect();
            if lefts.is_empty() {
                let _ = writeln!(skipped, "{line}\t{a}\t{b}\texcluded by filter");
                n_skipped += 1;
                continue;
            }
            requests.push((line, a, b, lefts, right));
        }
        let flat: Vec<Pair> = requests
            .iter()
            .flat_map(|(_, _, _, ls, r)| ls.iter().map(move |&l| (l, *r)))
            .collect();
        let scores = model.score_pairs(&graph, &flat)?;
        let mut scores = scores.into_iter();
        let mut rows = Vec::with_capacity(requests.len());
        for (_, a, b, lefts, right) in &requests {
            let right_label = graph.label(*right).to_string();
            let member_scores: BTreeMap<(String, String), f64> = lefts
                .iter()
                .map(|&l| {
                    (
                        (graph.label(l).to_string(), right_label.clone()),
                        scores.next().unwrap(),
                    )
                })
                .collect();
            let group = BTreeMap::from([(a.clone(), member_scores.keys().map(|k| k.0.clone()).collect())]);
            let averaged = mesh_averaged_scores(&member_scores, &group)?;
            rows.push((a.clone(), b.clone(), averaged[&(a.clone(), right_label)]));
        }
        rows
    } else {
        let candidates: Vec<Pair> = novel_pairs(&graph).into_iter().filter(|&p| keep(p)).collect();
        let scores = model.score_pairs(&graph, &candidates)?;
        let scored: Vec<(Pair, f64)> = candidates.into_iter().zip(scores).collect();
        let k = args.top.unwrap_or(usize::MAX);
        top_k(scored, k, args.per_node)
            .into_iter()
            .map(|(p, s)| (graph.label(p.0).to_string(), graph.label(p.1).to_string(), s))
            .collect()
    };
    write_text(&args.out, &format_rows(&rows))?;
    let skipped_path = args
        .skipped
        .clone()
        .unwrap_or_else(|| with_suffix(&args.out, ".skipped.tsv"));
    write_text(&skipped_path, &skipped)?;
    if n_skipped > 0 {
        log::warn!("{n_skipped} pair(s) skipped, see {}", skipped_path.display());
    }
    let mut run = RunRecorder::new("predict", config_echo(args)?);
    run.inputs = [
        Some(args.input.checkpoint.clone()),
        Some(args.input.graph.clone()),
        args.pairs.clone(),
        args.exclude_nodes.clone(),
        args.mesh_mapping.clone(),
    ]
    .into_iter()
    .flatten()
    .collect();
    run.outputs = vec![args.out.clone(), skipped_path];
    run.write(&args.out)?;
    Ok(())
}

fn parse_edge(graph: &KnowledgeGraph, edge: &str) -> Result<Pair> {
    let (a, b) = edge
        .split_once(',')
        .ok_or_else(|| Error::InvalidInput(format!("edge {edge:?} must be two comma-separated labels")))?;
    let (lk, rk) = graph.target_kinds();
    let find = |label: &str, kind: NodeKind| {
        resolve_kind(graph, label.trim(), kind).ok_or_else(|| Error::Unknown {
            what: "node label",
            name: label.trim().to_string(),
        })
    };
    Ok((find(a, lk)?, find(b, rk)?))
}

pub fn explain(args: &ExplainArgs) -> Result<()> {
    let Loaded { graph, model } = load_model(&args.input)?;
    let gcn = model
        .as_gcn()
        .ok_or_else(|| Error::InvalidInput(format!("attribution needs a graphix checkpoint, got {}", model.name())))?;
    let edge = parse_edge(&graph, &args.edge)?;
    let report = integrated_gradients(&graph, gcn, &AttributionRequest::for_model(gcn, edge, args.m))?;
    write_json(&args.out, &report.to_json(&graph))?;
    let exporter = ExporterRegistry::builtin();
    let exporter = exporter.get(args.format.as_str())?;
    let export_path = args
        .export
        .clone()
        .unwrap_or_else(|| args.out.with_extension(format!("subgraph.{}", exporter.extension())));
    write_text(&export_path, &exporter.render(&SubgraphView::new(&graph, &report))?)?;
    if let Some(top) = report.top_gene() {
        log::info!(
            "top gene {} (IG {:.6})",
            graph.label(top),
            report.ig(top).unwrap_or(0.0)
        );
    }
    let mut run = RunRecorder::new("explain", config_echo(args)?);
    run.inputs = vec![args.input.checkpoint.clone(), args.input.graph.clone()];
    run.outputs = vec![args.out.clone(), export_path];
    run.write(&args.out)?;
    Ok(())
}

#[derive(Serialize)]
struct MetricsReport<'a> {
    model: &'a str,
    folds: usize,
    seed: u64,
    shuffle_labels: bool,
    graph_hash: String,
    n_positives: usize,
    model_config: &'a ModelConfig,
    train_config: &'a TrainConfig,
    fold_sizes: Vec<usize>,
    per_fold: &'a [kgx_core::evaluation::FoldOutcome],
    roc_auc: &'a kgx_core::evaluation::Summary,
    pr_auc: &'a kgx_core::evaluation::Summary,
    /// Mean ± sample standard deviation, three decimals.
    table: BTreeMap<&'static str, String>,
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let mut graph = read_bundle(&args.graph)?;
    let graph_hash = graph.digest();
    if args.shuffle_labels {
        graph = shuffle_positive_labels(&graph, args.seed);
    }
    let (model_config, train_config) = resolve_configs(&args.model, args.seed)?;
    let plan = make_folds(graph.positives(), args.folds, args.seed)?;
    let spec = ModelSpec {
        name: args.model.model.as_str().to_string(),
        config: model_config.clone(),
    };
    let report = cross_validate(&graph, &ModelRegistry::builtin(), &spec, &train_config, &plan)?;
    log::info!(
        "ROC-AUC {}  PR-AUC {}",
        report.metrics.roc_auc.pm(),
        report.metrics.pr_auc.pm()
    );
    let table = BTreeMap::from([
        ("model", spec.name.clone()),
        ("roc_auc", report.metrics.roc_auc.pm()),
        ("pr_auc", report.metrics.pr_auc.pm()),
    ]);
    let out = MetricsReport {
        model: &spec.name,
        folds: args.folds,
        seed: args.seed,
        shuffle_labels: args.shuffle_labels,
        graph_hash,
        n_positives: graph.positives().len(),
        model_config: &model_config,
        train_config: &train_config,
        fold_sizes: plan.sizes(),
        per_fold: &report.folds,
        roc_auc: &report.metrics.roc_auc,
        pr_auc: &report.metrics.pr_auc,
        table,
    };
    write_json(&args.out, &out)?;
    let mut run = RunRecorder::new("evaluate", config_echo(args)?);
    run.seed = Some(args.seed);
    run.inputs = [
        Some(args.graph.clone()),
        args.model.config.clone(),
        args.model.model_config.clone(),
    ]
    .into_iter()
    .flatten()
    .collect();
    run.outputs = vec![args.out.clone()];
    run.write(&args.out)?;
    Ok(())
}

fn parse_threshold(s: &str) -> Result<PositiveThreshold> {
    match s {
        "median" => Ok(PositiveThreshold::TrainingMedian),
        "none" => Ok(PositiveThreshold::None),
        v => v
            .parse::<f64>()
            .ok()
            .filter(|t| t.is_finite())
            .map(PositiveThreshold::Fixed)
            .ok_or_else(|| Error::InvalidInput(format!("threshold {v:?} is not median, none or a number"))),
    }
}

pub fn explain_eval(args: &ExplainEvalArgs) -> Result<()> {
    let threshold = parse_threshold(&args.threshold)?;
    let Loaded { graph, model } = load_model(&args.input)?;
    let gcn = model
        .as_gcn()
        .ok_or_else(|| Error::InvalidInput(format!("attribution needs a graphix checkpoint, got {}", model.name())))?;
    let records = read_records(&args.records)?;
    let summary = explainability_eval(
        &graph,
        gcn,
        &records,
        &ExplainEvalConfig {
            steps: args.m,
            threshold,
        },
    )?;
    for s in &summary.skipped {
        log::warn!("record on line {} skipped: {}", s.line, s.reason);
    }
    log::info!("{}", summary.accuracy_line());
    write_json(&args.out, &summary)?;
    let tsv = args.tsv.clone().unwrap_or_else(|| with_suffix(&args.out, ".tsv"));
    write_text(&tsv, &summary.to_tsv())?;
    let mut run = RunRecorder::new("explain-eval", config_echo(args)?);
    run.inputs = vec![
        args.input.checkpoint.clone(),
        args.input.graph.clone(),
        args.records.clone(),
    ];
    run.outputs = vec![args.out.clone(), tsv];
    run.write(&args.out)?;
    Ok(())
}

pub fn export(args: &ExportArgs) -> Result<()> {
    let Loaded { graph, model } = load_model(&args.input)?;
    export_embeddings(&graph, model.as_ref(), &args.out)?;
    let mut run = RunRecorder::new("export-embeddings", config_echo(args)?);
    run.inputs = vec![args.input.checkpoint.clone(), args.input.graph.clone()];
    run.outputs = vec![args.out.clone()];
    run.write(&args.out)?;
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let mut spec: SyntheticSpec = match &args.config {
        Some(p) => read_json(p)?,
        None => SyntheticSpec::default(),
    };
    spec.seed = args.seed;
    if let Some(v) = args.n_disease {
        spec.n_disease = v;
    }
    if let Some(v) = args.n_drug {
        spec.n_drug = v;
    }
    if let Some(v) = args.n_gene {
        spec.n_gene = v;
    }
    if let Some(v) = args.mediator_fraction {
        spec.mediator_fraction = v;
    }
    if let Some(v) = args.noise {
        spec.noise_edges = v;
    }
    let s = generate_synthetic(&spec)?;
    s.write_inputs(&args.out_dir)?;
    write_json(&args.out_dir.join("spec.json"), &spec)?;
    log::info!(
        "{} nodes, {} positives, {} mediated",
        s.graph.n_nodes(),
        s.truth.positives.len(),
        s.truth.mediators.len()
    );
    let mut run = RunRecorder::new("synth", serde_json::json!({ "args": config_echo(args)?, "spec": spec }));
    run.seed = Some(args.seed);
    run.inputs = args.config.iter().cloned().collect();
    let mut outputs: Vec<PathBuf> = fs::read_dir(&args.out_dir)
        .map_err(|e| Error::io(&args.out_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().is_some_and(|n| n != "run.json"))
        .collect();
    outputs.sort();
    run.outputs = outputs;
    run.write(&args.out_dir)?;
    Ok(())
}
