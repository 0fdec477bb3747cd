use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::mesh::SkipReport;
use super::{EdgeList, KnowledgeGraph, LabelTable, NodeId, Pair, RelationKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentMode {
    /// Largest component of the union of all message-passing relations.
    #[default]
    Merged,
    /// Largest component of each relation first, then of their union.
    PerRelation,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct AssembleOptions {
    #[serde(default)]
    pub component_mode: ComponentMode,
    #[serde(default)]
    pub normalize_adjacency: bool,
}

/// Counts of the assembled graph, one field per column of a network-components table.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BuildReport {
    pub target: RelationKind,
    pub positives: usize,
    pub positives_dropped: usize,
    pub edges: BTreeMap<RelationKind, usize>,
    pub nodes: BTreeMap<super::NodeKind, usize>,
    pub nodes_total: usize,
    pub nodes_before_component: usize,
    pub components_before: usize,
    pub duplicates_collapsed: usize,
    pub self_pairs_rejected: usize,
    pub skipped: SkipReport,
    pub graph_digest: String,
}

struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Membership mask of the largest connected component spanned by `pairs`, plus the
/// number of components. Only nodes touched by some pair count. Size ties go to the
/// component holding the smallest node id.
fn largest_component(n: usize, pairs: impl Iterator<Item = Pair> + Clone) -> (Vec<bool>, usize) {
    let mut ds = DisjointSet::new(n);
    let mut touched = vec![false; n];
    for (a, b) in pairs {
        touched[a.0] = true;
        touched[b.0] = true;
        ds.union(a.0, b.0);
    }
    let mut sizes: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for i in (0..n).filter(|&i| touched[i]) {
        let root = ds.find(i);
        let e = sizes.entry(root).or_insert((0, i));
        e.0 += 1;
        e.1 = e.1.min(i);
    }
    let best = sizes
        .values()
        .max_by(|x, y| x.0.cmp(&y.0).then(y.1.cmp(&x.1)))
        .map(|&(_, min_id)| ds.find(min_id));
    let mask = match best {
        Some(root) => (0..n).map(|i| touched[i] && ds.find(i) == root).collect(),
        None => vec![false; n],
    };
    (mask, sizes.len())
}

/// Merges message-passing relations, keeps the largest connected component, and
/// stores target-relation pairs inside it as positives.
pub fn assemble(
    table: &LabelTable,
    edge_lists: &[EdgeList],
    target: RelationKind,
    options: AssembleOptions,
) -> Result<(KnowledgeGraph, BuildReport)> {
    let n = table.len();
    let mut merged: BTreeMap<RelationKind, Vec<Pair>> = BTreeMap::new();
    let mut target_pairs = Vec::new();
    let mut has_target = false;
    for el in edge_lists {
        if el.relation == RelationKind::SelfLoop {
            continue;
        }
        if el.relation == target {
            has_target = true;
            target_pairs.extend_from_slice(&el.pairs);
        } else {
            merged.entry(el.relation).or_default().extend_from_slice(&el.pairs);
        }
    }
    if !has_target {
        return Err(Error::InvalidInput(format!(
            "no edge list for target relation {target}"
        )));
    }
    if merged.is_empty() {
        return Err(Error::InvalidInput(
            "no message-passing relation besides the target".into(),
        ));
    }

    let mut dups = 0;
    let mut selfs = 0;
    let mut lists: BTreeMap<RelationKind, EdgeList> = BTreeMap::new();
    for (r, pairs) in merged {
        let (el, s, d) = EdgeList::from_pairs(r, pairs);
        selfs += s;
        dups += d;
        lists.insert(r, el);
    }
    let (target_list, s, d) = EdgeList::from_pairs(target, target_pairs);
    selfs += s;
    dups += d;
    if dups > 0 {
        log::info!("collapsed {dups} duplicate edges across inputs");
    }

    if options.component_mode == ComponentMode::PerRelation {
        for el in lists.values_mut() {
            let (mask, _) = largest_component(n, el.pairs.iter().copied());
            el.pairs.retain(|(a, b)| mask[a.0] && mask[b.0]);
        }
    }

    let all_pairs = lists.values().flat_map(|el| el.pairs.iter().copied());
    let (keep, n_components) = largest_component(n, all_pairs);
    let kept: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();
    if kept.is_empty() {
        return Err(Error::InvalidInput("merged graph is empty".into()));
    }
    let mut remap = vec![usize::MAX; n];
    for (new, &old) in kept.iter().enumerate() {
        remap[old] = new;
    }
    let map_pair = |(a, b): Pair| -> Option<Pair> {
        let (x, y) = (remap[a.0], remap[b.0]);
        (x != usize::MAX && y != usize::MAX).then_some((NodeId(x), NodeId(y)))
    };

    let relation_edges: Vec<EdgeList> = lists
        .values()
        .map(|el| EdgeList {
            relation: el.relation,
            pairs: el.pairs.iter().filter_map(|&p| map_pair(p)).collect(),
        })
        .filter(|el| !el.is_empty())
        .collect();
    let positives: Vec<Pair> = target_list.pairs.iter().filter_map(|&p| map_pair(p)).collect();
    let dropped = target_list.len() - positives.len();
    if positives.is_empty() {
        return Err(Error::InvalidInput(format!(
            "all {} target pairs fall outside the largest component",
            target_list.len()
        )));
    }

    let labels: Vec<String> = kept.iter().map(|&i| table.labels()[i].clone()).collect();
    let kinds = kept.iter().map(|&i| table.kinds()[i]).collect();
    let graph = KnowledgeGraph::from_parts(
        labels,
        kinds,
        relation_edges,
        target,
        positives,
        options.normalize_adjacency,
    )?;

    let mut nodes = BTreeMap::new();
    for k in super::NodeKind::ALL {
        nodes.insert(k, graph.kinds().iter().filter(|&&x| x == k).count());
    }
    let report = BuildReport {
        target,
        positives: graph.positives().len(),
        positives_dropped: dropped,
        edges: graph.edge_counts().into_iter().collect(),
        nodes,
        nodes_total: graph.n_nodes(),
        nodes_before_component: n,
        components_before: n_components,
        duplicates_collapsed: dups,
        self_pairs_rejected: selfs,
        skipped: SkipReport::default(),
        graph_digest: graph.digest(),
    };
    Ok((graph, report))
}
