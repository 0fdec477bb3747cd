//! Checks whether the gene with the highest attribution for a predicted
//! disease–drug edge is a known target of the drug.
//!
//! Records come from a TSV with columns `disease`, `drug`, `targets`, where the
//! last column is a comma-separated gene list (e.g. `KIT,PDGFRA`). A record counts
//! as a hit when any of its known targets ranks first among the candidate genes.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attribution::{integrated_gradients, rank_of, rank_proteins, AttributionRequest, DEFAULT_STEPS};
use crate::error::{Error, Result};
use crate::kgraph::{KnowledgeGraph, NodeId, NodeKind};
use crate::model::{LinkModel, RelationalGcn};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub line: usize,
    pub disease: String,
    pub drug: String,
    pub targets: Vec<String>,
}

pub fn read_records(path: &Path) -> Result<Vec<TargetRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_records(&text).map_err(|(line, message)| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    })
}

/// Blank lines and lines starting with `#` are skipped.
pub fn parse_records(text: &str) -> std::result::Result<Vec<TargetRecord>, (usize, String)> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 3 {
            return Err((
                k + 1,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let targets: Vec<String> = fields[2]
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(String::from)
            .collect();
        if fields[0].is_empty() || fields[1].is_empty() || targets.is_empty() {
            return Err((k + 1, "empty disease, drug or target field".into()));
        }
        out.push(TargetRecord {
            line: k + 1,
            disease: fields[0].to_string(),
            drug: fields[1].to_string(),
            targets,
        });
    }
    Ok(out)
}

/// Which records count as predicted positive before attribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum PositiveThreshold {
    /// Score strictly above the median score of the graph's known positives.
    #[default]
    TrainingMedian,
    /// Score strictly above a fixed value.
    Fixed(f64),
    /// Keep every record.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplainEvalConfig {
    pub steps: usize,
    pub threshold: PositiveThreshold,
}

impl Default for ExplainEvalConfig {
    fn default() -> Self {
        ExplainEvalConfig {
            steps: DEFAULT_STEPS,
            threshold: PositiveThreshold::TrainingMedian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub disease: String,
    pub drug: String,
    pub known_targets: Vec<String>,
    pub score: f64,
    pub n_candidates: usize,
    /// Rank of each known target among the candidates, in record order; `None`
    /// for targets outside the neighbourhood.
    pub target_ranks: Vec<Option<usize>>,
    /// Best rank over the known targets.
    pub target_rank: usize,
    pub top_gene: String,
    pub hit_at_1: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRecord {
    pub line: usize,
    pub disease: String,
    pub drug: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainSummary {
    pub records: Vec<EvalRecord>,
    pub skipped: Vec<SkippedRecord>,
    pub hits: usize,
    pub total: usize,
    pub accuracy: Option<f64>,
    pub score_threshold: Option<f64>,
    pub steps: usize,
}

impl ExplainSummary {
    /// `total accuracy = 16/21(76%)`.
    pub fn accuracy_line(&self) -> String {
        let pct = self.accuracy.map(|a| (a * 100.0).round() as i64).unwrap_or(0);
        format!("total accuracy = {}/{}({}%)", self.hits, self.total, pct)
    }

    /// One row per evaluated record plus a closing accuracy row.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("disease\tdrug\ttarget_protein\tn_candidate_proteins\ttarget_ranking\n");
        for r in &self.records {
            let ranks: Vec<String> = r
                .target_ranks
                .iter()
                .map(|k| k.map_or_else(|| "-".to_string(), |k| k.to_string()))
                .collect();
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}",
                r.disease,
                r.drug,
                r.known_targets.join(","),
                r.n_candidates,
                ranks.join(",")
            );
        }
        let _ = writeln!(s, "\t\t\t\t{}", self.accuracy_line());
        s
    }
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

pub fn explainability_eval(
    graph: &KnowledgeGraph,
    model: &RelationalGcn,
    records: &[TargetRecord],
    config: &ExplainEvalConfig,
) -> Result<ExplainSummary> {
    let hop_limit = model.config().n_layers;
    let threshold = match config.threshold {
        PositiveThreshold::TrainingMedian => {
            let mut scores = model.score_pairs(graph, graph.positives())?;
            median(&mut scores)
        }
        PositiveThreshold::Fixed(t) => Some(t),
        PositiveThreshold::None => None,
    };
    let (left_kind, right_kind) = graph.target_kinds();
    let mut evaluated = Vec::new();
    let mut skipped = Vec::new();
    let skip = |r: &TargetRecord, reason: String| SkippedRecord {
        line: r.line,
        disease: r.disease.clone(),
        drug: r.drug.clone(),
        reason,
    };
    let find = |label: &str, kind: NodeKind| graph.resolve(label, Some(kind)).filter(|&n| graph.kind(n) == kind);

    for r in records {
        let Some(d) = find(&r.disease, left_kind) else {
            skipped.push(skip(r, format!("{} {} not in graph", left_kind.as_str(), r.disease)));
            continue;
        };
        let Some(c) = find(&r.drug, right_kind) else {
            skipped.push(skip(r, format!("{} {} not in graph", right_kind.as_str(), r.drug)));
            continue;
        };
        let targets: Vec<Option<NodeId>> = r.targets.iter().map(|t| find(t, NodeKind::Gene)).collect();
        if targets.iter().all(Option::is_none) {
            skipped.push(skip(r, "no known target in graph".into()));
            continue;
        }
        let dist = graph.distances_from(&[d, c], Some(hop_limit));
        if !targets.iter().flatten().any(|t| dist[t.0].is_some()) {
            skipped.push(skip(
                r,
                format!("no known target within {hop_limit} hop(s) of the edge"),
            ));
            continue;
        }
        let score = model.score_pairs(graph, &[(d, c)])?[0];
        if let Some(t) = threshold {
            if score <= t {
                skipped.push(skip(r, format!("score {score:.6} not above threshold {t:.6}")));
                continue;
            }
        }
        evaluated.push((r, d, c, targets, score));
    }

    use rayon::prelude::*;
    let results: Vec<Result<EvalRecord>> = evaluated
        .par_iter()
        .map(|(r, d, c, targets, score)| {
            let req = AttributionRequest::for_model(model, (*d, *c), config.steps);
            let report = integrated_gradients(graph, model, &req)?;
            let ranking = rank_proteins(&report);
            let target_ranks: Vec<Option<usize>> =
                targets.iter().map(|t| t.and_then(|t| rank_of(&ranking, t))).collect();
            let target_rank = target_ranks
                .iter()
                .flatten()
                .copied()
                .min()
                .expect("a target is in range");
            Ok(EvalRecord {
                disease: graph.label(*d).to_string(),
                drug: graph.label(*c).to_string(),
                known_targets: r.targets.clone(),
                score: *score,
                n_candidates: ranking.len(),
                target_ranks,
                target_rank,
                top_gene: graph.label(ranking[0].0).to_string(),
                hit_at_1: target_rank == 1,
            })
        })
        .collect();
    let records: Vec<EvalRecord> = results.into_iter().collect::<Result<_>>()?;
    let hits = records.iter().filter(|r| r.hit_at_1).count();
    let total = records.len();
    Ok(ExplainSummary {
        accuracy: (total > 0).then(|| hits as f64 / total as f64),
        records,
        skipped,
        hits,
        total,
        score_threshold: threshold,
        steps: config.steps,
    })
}
