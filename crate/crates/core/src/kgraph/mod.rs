//! Typed knowledge graph: node labels and kinds, per-relation sparse adjacency,
//! and the held-out positives of the prediction target.

mod assemble;
mod build;
mod bundle;
pub mod mesh;
mod parse;
mod sparse;

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use assemble::{assemble, AssembleOptions, BuildReport, ComponentMode};
pub use build::{build_graph, BuildManifest};
pub use bundle::{read_bundle, write_bundle, BUNDLE_VERSION};
pub use parse::{parse_edge_file, read_label_pairs, LabelTable};
pub use sparse::Csr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

pub type Pair = (NodeId, NodeId);

/// Node type. Used for sampling and reporting only, never as a model feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Disease,
    Drug,
    Gene,
}

impl NodeKind {
    pub const ALL: [NodeKind; 3] = [NodeKind::Disease, NodeKind::Drug, NodeKind::Gene];

    pub fn namespace(self) -> &'static str {
        match self {
            NodeKind::Disease => "disease",
            NodeKind::Drug => "drug",
            NodeKind::Gene => "gene",
        }
    }

    pub fn as_str(self) -> &'static str {
        self.namespace()
    }

    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    DiseaseDisease,
    DiseaseGene,
    GeneGene,
    GeneDrug,
    DiseaseDrug,
    SelfLoop,
}

impl RelationKind {
    pub const ASSOCIATIONS: [RelationKind; 5] = [
        RelationKind::DiseaseDisease,
        RelationKind::DiseaseGene,
        RelationKind::GeneGene,
        RelationKind::GeneDrug,
        RelationKind::DiseaseDrug,
    ];

    /// Kinds of the (source, target) columns. `None` for `SelfLoop`.
    pub fn endpoints(self) -> Option<(NodeKind, NodeKind)> {
        use NodeKind::*;
        Some(match self {
            RelationKind::DiseaseDisease => (Disease, Disease),
            RelationKind::DiseaseGene => (Disease, Gene),
            RelationKind::GeneGene => (Gene, Gene),
            RelationKind::GeneDrug => (Gene, Drug),
            RelationKind::DiseaseDrug => (Disease, Drug),
            RelationKind::SelfLoop => return None,
        })
    }

    pub fn is_homogeneous(self) -> bool {
        matches!(self.endpoints(), Some((a, b)) if a == b)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::DiseaseDisease => "disease_disease",
            RelationKind::DiseaseGene => "disease_gene",
            RelationKind::GeneGene => "gene_gene",
            RelationKind::GeneDrug => "gene_drug",
            RelationKind::DiseaseDrug => "disease_drug",
            RelationKind::SelfLoop => "self_loop",
        }
    }

    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(c: u8) -> Option<Self> {
        [
            RelationKind::DiseaseDisease,
            RelationKind::DiseaseGene,
            RelationKind::GeneGene,
            RelationKind::GeneDrug,
            RelationKind::DiseaseDrug,
            RelationKind::SelfLoop,
        ]
        .get(c as usize)
        .copied()
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        let kind = match norm.as_str() {
            "disease_disease" => RelationKind::DiseaseDisease,
            "disease_gene" | "gene_disease" => RelationKind::DiseaseGene,
            "gene_gene" => RelationKind::GeneGene,
            "gene_drug" | "drug_gene" => RelationKind::GeneDrug,
            "disease_drug" | "drug_disease" => RelationKind::DiseaseDrug,
            "self_loop" => RelationKind::SelfLoop,
            _ => {
                return Err(Error::Unknown {
                    what: "relation",
                    name: s.to_string(),
                })
            }
        };
        Ok(kind)
    }
}

/// Undirected edges of one relation. Pairs of heterogeneous relations are oriented
/// (source kind, target kind); pairs of homogeneous relations are stored `(min, max)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub relation: RelationKind,
    pub pairs: Vec<Pair>,
}

impl EdgeList {
    pub fn new(relation: RelationKind) -> Self {
        EdgeList {
            relation,
            pairs: Vec::new(),
        }
    }

    /// Canonicalizes, drops self-pairs and duplicates. Returns the list plus the
    /// number of (self-pairs, duplicates) removed.
    pub fn from_pairs(relation: RelationKind, pairs: impl IntoIterator<Item = Pair>) -> (Self, usize, usize) {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        let (mut selfs, mut dups) = (0, 0);
        for (a, b) in pairs {
            if a == b && relation != RelationKind::SelfLoop {
                selfs += 1;
                continue;
            }
            let p = if relation.is_homogeneous() && b < a {
                (b, a)
            } else {
                (a, b)
            };
            if seen.insert(p) {
                out.push(p);
            } else {
                dups += 1;
            }
        }
        (EdgeList { relation, pairs: out }, selfs, dups)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Multi-relational graph ready for propagation. Immutable once built.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    labels: Vec<String>,
    kinds: Vec<NodeKind>,
    index: HashMap<String, NodeId>,
    /// Message-passing relations; the last entry is always `SelfLoop`.
    relations: Vec<(RelationKind, Csr)>,
    normalized: bool,
    target: RelationKind,
    positives: Vec<Pair>,
}

impl KnowledgeGraph {
    /// Builds a graph from already-filtered parts. Relation edge lists must not contain
    /// the target relation; `SelfLoop` is added here.
    pub fn from_parts(
        labels: Vec<String>,
        kinds: Vec<NodeKind>,
        relation_edges: Vec<EdgeList>,
        target: RelationKind,
        positives: Vec<Pair>,
        normalize_adjacency: bool,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidInput("graph has no nodes".into()));
        }
        if kinds.len() != n {
            return Err(Error::Dimension(format!("{} labels but {} kinds", n, kinds.len())));
        }
        if target == RelationKind::SelfLoop || target.endpoints().is_none() {
            return Err(Error::InvalidInput("target relation cannot be self_loop".into()));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), NodeId(i)).is_some() {
                return Err(Error::InvalidInput(format!("duplicate label {l}")));
            }
        }
        let mut relations = Vec::new();
        for el in relation_edges {
            if el.relation == target {
                return Err(Error::InvalidInput(format!(
                    "target relation {target} cannot be used for message passing"
                )));
            }
            if el.relation == RelationKind::SelfLoop {
                continue;
            }
            if relations.iter().any(|(r, _)| *r == el.relation) {
                return Err(Error::InvalidInput(format!("relation {} given twice", el.relation)));
            }
            let mut pairs = Vec::with_capacity(el.pairs.len());
            for &(a, b) in &el.pairs {
                if a.0 >= n || b.0 >= n {
                    return Err(Error::InvalidInput(format!("edge ({a}, {b}) out of range")));
                }
                pairs.push((a.0, b.0));
            }
            let csr = Csr::symmetric_from_pairs(n, &pairs);
            let csr = if normalize_adjacency { csr.sym_normalized() } else { csr };
            relations.push((el.relation, csr));
        }
        relations.sort_by_key(|(r, _)| *r);
        relations.push((RelationKind::SelfLoop, Csr::identity(n)));
        for &(a, b) in &positives {
            if a.0 >= n || b.0 >= n {
                return Err(Error::InvalidInput(format!("positive ({a}, {b}) out of range")));
            }
        }
        Ok(KnowledgeGraph {
            labels,
            kinds,
            index,
            relations,
            normalized: normalize_adjacency,
            target,
            positives,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.labels[id.0]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.kinds[id.0]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn node(&self, label: &str) -> Option<NodeId> {
        self.index.get(label).copied()
    }

    /// Looks a label up verbatim, then with the namespace of `kind` prepended.
    pub fn resolve(&self, label: &str, kind: Option<NodeKind>) -> Option<NodeId> {
        if let Some(id) = self.node(label) {
            return Some(id);
        }
        let kind = kind?;
        let namespaces: &[&str] = match kind {
            NodeKind::Disease => &["disease", "mesh"],
            NodeKind::Drug => &["drug"],
            NodeKind::Gene => &["gene"],
        };
        namespaces.iter().find_map(|ns| self.node(&format!("{ns}::{label}")))
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> Vec<NodeId> {
        (0..self.n_nodes())
            .filter(|&i| self.kinds[i] == kind)
            .map(NodeId)
            .collect()
    }

    pub fn target(&self) -> RelationKind {
        self.target
    }

    pub fn target_kinds(&self) -> (NodeKind, NodeKind) {
        self.target.endpoints().expect("target is never self_loop")
    }

    pub fn positives(&self) -> &[Pair] {
        &self.positives
    }

    /// Same structure with a different supervision set.
    pub fn with_positives(&self, positives: Vec<Pair>) -> Self {
        KnowledgeGraph {
            positives,
            ..self.clone()
        }
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Same graph with raw (`false`) or symmetric-normalized (`true`) adjacency values.
    pub fn with_normalization(&self, normalize: bool) -> KnowledgeGraph {
        let relations = self
            .relations
            .iter()
            .map(|(r, a)| {
                if *r == RelationKind::SelfLoop {
                    return (*r, a.clone());
                }
                let raw = a.structure();
                (*r, if normalize { raw.sym_normalized() } else { raw })
            })
            .collect();
        KnowledgeGraph {
            relations,
            normalized: normalize,
            ..self.clone()
        }
    }

    /// Relations used in propagation, `SelfLoop` last.
    pub fn relations(&self) -> &[(RelationKind, Csr)] {
        &self.relations
    }

    pub fn relation_kinds(&self) -> Vec<RelationKind> {
        self.relations.iter().map(|(r, _)| *r).collect()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn adjacency(&self, r: RelationKind) -> Option<&Csr> {
        self.relations.iter().find(|(k, _)| *k == r).map(|(_, a)| a)
    }

    /// `A_r · x`.
    pub fn adjacency_matvec(&self, r: RelationKind, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let a = self.adjacency(r).ok_or(Error::Unknown {
            what: "relation in graph",
            name: r.to_string(),
        })?;
        if r == RelationKind::SelfLoop {
            if x.nrows() != self.n_nodes() {
                return Err(Error::Dimension(format!(
                    "graph has {} nodes, features have {} rows",
                    self.n_nodes(),
                    x.nrows()
                )));
            }
            return Ok(x.to_owned());
        }
        a.matmul(x)
    }

    /// Neighbors of `i` over the union of message-passing relations (self excluded),
    /// sorted and deduplicated.
    pub fn neighbors(&self, i: NodeId) -> Vec<NodeId> {
        let mut out: Vec<usize> = self
            .relations
            .iter()
            .filter(|(r, _)| *r != RelationKind::SelfLoop)
            .flat_map(|(_, a)| a.row_indices(i.0).iter().copied())
            .filter(|&j| j != i.0)
            .collect();
        out.sort_unstable();
        out.dedup();
        out.into_iter().map(NodeId).collect()
    }

    /// BFS distance (in union edges) from a set of sources, `None` if unreachable.
    pub fn distances_from(&self, sources: &[NodeId], max_depth: Option<usize>) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n_nodes()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if dist[s.0].is_none() {
                dist[s.0] = Some(0);
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            let d = dist[u.0].unwrap();
            if max_depth.is_some_and(|m| d >= m) {
                continue;
            }
            for v in self.neighbors(u) {
                if dist[v.0].is_none() {
                    dist[v.0] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Number of undirected edges per message-passing relation (self loops excluded).
    pub fn edge_counts(&self) -> Vec<(RelationKind, usize)> {
        self.relations
            .iter()
            .filter(|(r, _)| *r != RelationKind::SelfLoop)
            .map(|(r, a)| (*r, a.nnz() / 2))
            .collect()
    }

    /// SHA-256 of the bundle encoding; identifies the graph in checkpoints.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut buf = Vec::new();
        bundle::encode(self, &mut buf).expect("in-memory encode");
        hex::encode(Sha256::digest(&buf))
    }

    /// Induced subgraph on `nodes`, keeping adjacency values (so normalized weights
    /// still reflect full-graph degrees). Positives are dropped.
    pub fn induced(&self, nodes: &[NodeId]) -> KnowledgeGraph {
        let ids: Vec<usize> = nodes.iter().map(|n| n.0).collect();
        let labels: Vec<String> = ids.iter().map(|&i| self.labels[i].clone()).collect();
        let index = labels.iter().enumerate().map(|(k, l)| (l.clone(), NodeId(k))).collect();
        KnowledgeGraph {
            kinds: ids.iter().map(|&i| self.kinds[i]).collect(),
            labels,
            index,
            relations: self.relations.iter().map(|(r, a)| (*r, a.submatrix(&ids))).collect(),
            normalized: self.normalized,
            target: self.target,
            positives: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn path_graph() -> KnowledgeGraph {
        let (gg, _, _) = EdgeList::from_pairs(RelationKind::GeneGene, [(NodeId(0), NodeId(1)), (NodeId(1), NodeId(2))]);
        KnowledgeGraph::from_parts(
            vec!["gene::a".into(), "gene::b".into(), "gene::c".into()],
            vec![NodeKind::Gene; 3],
            vec![gg],
            RelationKind::DiseaseDrug,
            vec![],
            false,
        )
        .unwrap()
    }

    #[test]
    fn relation_names_round_trip() {
        for r in RelationKind::ASSOCIATIONS {
            assert_eq!(r.as_str().parse::<RelationKind>().unwrap(), r);
        }
        assert!("drug_drug".parse::<RelationKind>().is_err());
    }

    #[test]
    fn self_loop_always_last() {
        let g = path_graph();
        assert_eq!(g.relation_kinds(), vec![RelationKind::GeneGene, RelationKind::SelfLoop]);
    }

    #[test]
    fn path_matvec() {
        let g = path_graph();
        let x = ndarray::array![[1.0], [2.0], [3.0]];
        let y = g.adjacency_matvec(RelationKind::GeneGene, x.view()).unwrap();
        assert_eq!(y, ndarray::array![[2.0], [4.0], [2.0]]);
        let s = g.adjacency_matvec(RelationKind::SelfLoop, x.view()).unwrap();
        assert_eq!(s, x);
    }

    #[test]
    fn matvec_dimension_mismatch() {
        let g = path_graph();
        let x = Array2::<f64>::zeros((4, 2));
        assert!(g.adjacency_matvec(RelationKind::SelfLoop, x.view()).is_err());
        assert!(g.adjacency_matvec(RelationKind::GeneGene, x.view()).is_err());
    }

    #[test]
    fn target_not_allowed_in_propagation() {
        let (dd, _, _) = EdgeList::from_pairs(RelationKind::DiseaseDrug, [(NodeId(0), NodeId(1))]);
        let err = KnowledgeGraph::from_parts(
            vec!["disease::a".into(), "drug::b".into()],
            vec![NodeKind::Disease, NodeKind::Drug],
            vec![dd],
            RelationKind::DiseaseDrug,
            vec![],
            false,
        );
        assert!(err.is_err());
    }

    #[test]
    fn edge_list_dedup_and_self_pairs() {
        let (el, selfs, dups) = EdgeList::from_pairs(
            RelationKind::GeneGene,
            [(NodeId(0), NodeId(1)), (NodeId(1), NodeId(0)), (NodeId(2), NodeId(2))],
        );
        assert_eq!(el.pairs, vec![(NodeId(0), NodeId(1))]);
        assert_eq!((selfs, dups), (1, 1));
    }

    #[test]
    fn resolve_with_namespace() {
        let g = path_graph();
        assert_eq!(g.resolve("b", Some(NodeKind::Gene)), Some(NodeId(1)));
        assert_eq!(g.resolve("gene::c", None), Some(NodeId(2)));
        assert_eq!(g.resolve("b", Some(NodeKind::Drug)), None);
    }
}
