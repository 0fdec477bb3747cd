//! Helpers for scoring unseen pairs: candidate enumeration, synonym filtering,
//! top-K selection, MeSH score averaging and feature export.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kgraph::mesh::MeshTreeNumber;
use crate::kgraph::{KnowledgeGraph, NodeId, Pair};
use crate::model::LinkModel;

/// Every target-kind pair that is not a known positive, left node major.
pub fn novel_pairs(graph: &KnowledgeGraph) -> Vec<Pair> {
    let (lk, rk) = graph.target_kinds();
    let homogeneous = lk == rk;
    let known: HashSet<Pair> = graph.positives().iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
    let rights = graph.nodes_of_kind(rk);
    let mut out = Vec::new();
    for l in graph.nodes_of_kind(lk) {
        for &r in &rights {
            if (homogeneous && r <= l) || known.contains(&(l, r)) {
                continue;
            }
            out.push((l, r));
        }
    }
    out
}

/// Flags pairs whose left node shares its first-level MeSH code with some disease
/// already paired with the same right node among the known positives. Left nodes
/// without a MeSH label are never flagged.
#[derive(Debug, Clone)]
pub struct MeshSynonymFilter {
    known: HashSet<(String, NodeId)>,
    first_level: Vec<Option<String>>,
}

impl MeshSynonymFilter {
    pub fn new(graph: &KnowledgeGraph) -> Self {
        let first_level: Vec<Option<String>> = graph
            .labels()
            .iter()
            .map(|l| MeshTreeNumber::from_node_label(l).map(|t| t.first_level().to_string()))
            .collect();
        let known = graph
            .positives()
            .iter()
            .filter_map(|&(d, c)| first_level[d.0].clone().map(|f| (f, c)))
            .collect();
        MeshSynonymFilter { known, first_level }
    }

    pub fn is_synonymous(&self, (left, right): Pair) -> bool {
        self.first_level[left.0]
            .as_ref()
            .is_some_and(|f| self.known.contains(&(f.clone(), right)))
    }
}

/// Highest scores first (ties by pair), keeping `k` overall or `k` per left node.
pub fn top_k(mut scored: Vec<(Pair, f64)>, k: usize, per_node: bool) -> Vec<(Pair, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    if !per_node {
        scored.truncate(k);
        return scored;
    }
    let mut taken: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut out: Vec<(Pair, f64)> = scored
        .into_iter()
        .filter(|(p, _)| {
            let n = taken.entry(p.0).or_insert(0);
            *n += 1;
            *n <= k
        })
        .collect();
    out.sort_by(|a, b| a.0 .0.cmp(&b.0 .0).then(b.1.total_cmp(&a.1)).then(a.0.cmp(&b.0)));
    out
}

/// Mean of the `(tree number, drug)` scores over each label's tree numbers.
pub fn mesh_averaged_scores(
    scores: &BTreeMap<(String, String), f64>,
    groups: &BTreeMap<String, BTreeSet<String>>,
) -> Result<BTreeMap<(String, String), f64>> {
    let drugs: BTreeSet<&String> = scores.keys().map(|(_, c)| c).collect();
    let mut out = BTreeMap::new();
    for (label, codes) in groups {
        if codes.is_empty() {
            return Err(Error::InvalidInput(format!("disease {label} has no tree numbers")));
        }
        for &drug in &drugs {
            let present = codes
                .iter()
                .filter(|code| scores.contains_key(&((*code).clone(), drug.clone())))
                .count();
            if present == 0 {
                continue;
            }
            let mut sum = 0.0;
            for code in codes {
                let key = (code.clone(), drug.clone());
                sum += *scores
                    .get(&key)
                    .ok_or_else(|| Error::InvalidInput(format!("missing score for tree number {code} with {drug}")))?;
            }
            out.insert((label.clone(), drug.clone()), sum / codes.len() as f64);
        }
    }
    Ok(out)
}

/// CSV with `label,kind,f0,...`; values use 17 significant digits so parsing
/// them back gives the exact same doubles.
pub fn export_embeddings(graph: &KnowledgeGraph, model: &dyn LinkModel, path: &Path) -> Result<()> {
    let emb = model.node_embeddings();
    if emb.nrows() != graph.n_nodes() {
        return Err(Error::Dimension(format!(
            "model has {} embeddings, graph has {} nodes",
            emb.nrows(),
            graph.n_nodes()
        )));
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header = vec!["label".to_string(), "kind".to_string()];
    header.extend((0..emb.ncols()).map(|k| format!("f{k}")));
    w.write_record(&header)?;
    for (i, row) in emb.rows().into_iter().enumerate() {
        let id = crate::kgraph::NodeId(i);
        let mut rec = vec![graph.label(id).to_string(), graph.kind(id).as_str().to_string()];
        rec.extend(row.iter().map(|v| format!("{v:.16e}")));
        w.write_record(&rec)?;
    }
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgraph::{EdgeList, NodeKind, RelationKind};

    fn mesh_graph() -> KnowledgeGraph {
        let labels = [
            "mesh::C04.1",
            "mesh::C04.2",
            "mesh::C10",
            "drug::x",
            "drug::y",
            "gene::g",
        ];
        let kinds = [
            NodeKind::Disease,
            NodeKind::Disease,
            NodeKind::Disease,
            NodeKind::Drug,
            NodeKind::Drug,
            NodeKind::Gene,
        ];
        let dg = EdgeList::from_pairs(
            RelationKind::DiseaseGene,
            [(NodeId(0), NodeId(5)), (NodeId(1), NodeId(5)), (NodeId(2), NodeId(5))],
        )
        .0;
        let gc = EdgeList::from_pairs(RelationKind::GeneDrug, [(NodeId(5), NodeId(3)), (NodeId(5), NodeId(4))]).0;
        KnowledgeGraph::from_parts(
            labels.iter().map(|s| s.to_string()).collect(),
            kinds.to_vec(),
            vec![dg, gc],
            RelationKind::DiseaseDrug,
            vec![(NodeId(0), NodeId(3))],
            false,
        )
        .unwrap()
    }

    #[test]
    fn novel_excludes_positives() {
        let g = mesh_graph();
        let pairs = novel_pairs(&g);
        assert_eq!(pairs.len(), 3 * 2 - 1);
        assert!(!pairs.contains(&(NodeId(0), NodeId(3))));
    }

    #[test]
    fn synonym_shares_first_level() {
        let f = MeshSynonymFilter::new(&mesh_graph());
        assert!(f.is_synonymous((NodeId(1), NodeId(3))));
        assert!(!f.is_synonymous((NodeId(2), NodeId(3))));
        assert!(!f.is_synonymous((NodeId(1), NodeId(4))));
    }

    #[test]
    fn top_k_per_node() {
        let p = |a, b| (NodeId(a), NodeId(b));
        let scored = vec![
            (p(0, 5), 0.1),
            (p(0, 6), 0.9),
            (p(1, 5), 0.5),
            (p(1, 6), 0.5),
            (p(2, 5), 0.0),
        ];
        assert_eq!(
            top_k(scored.clone(), 1, true),
            vec![(p(0, 6), 0.9), (p(1, 5), 0.5), (p(2, 5), 0.0)]
        );
        assert_eq!(top_k(scored, 2, false), vec![(p(0, 6), 0.9), (p(1, 5), 0.5)]);
    }

    fn key(a: &str, b: &str) -> (String, String) {
        (a.to_string(), b.to_string())
    }

    #[test]
    fn averages_groups() {
        let scores = BTreeMap::from([
            (key("C04.1", "drug::x"), 0.2),
            (key("C04.2", "drug::x"), 0.4),
            (key("C05", "drug::x"), 0.9),
        ]);
        let groups = BTreeMap::from([
            (
                "disease::a".to_string(),
                BTreeSet::from(["C04.1".to_string(), "C04.2".to_string()]),
            ),
            ("disease::b".to_string(), BTreeSet::from(["C05".to_string()])),
        ]);
        let avg = mesh_averaged_scores(&scores, &groups).unwrap();
        assert!((avg[&key("disease::a", "drug::x")] - 0.3).abs() < 1e-15);
        assert_eq!(avg[&key("disease::b", "drug::x")], 0.9);
    }

    #[test]
    fn missing_member_is_an_error() {
        let scores = BTreeMap::from([(key("C04.1", "drug::x"), 0.2)]);
        let groups = BTreeMap::from([(
            "disease::a".to_string(),
            BTreeSet::from(["C04.1".to_string(), "C04.9".to_string()]),
        )]);
        let err = mesh_averaged_scores(&scores, &groups).unwrap_err();
        assert!(err.to_string().contains("C04.9"));
    }
}
