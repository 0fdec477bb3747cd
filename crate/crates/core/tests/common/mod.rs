#![allow(dead_code)]

use kgx_core::kgraph::{EdgeList, KnowledgeGraph, NodeId, NodeKind, Pair, RelationKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random typed graph with `n` nodes (at least one disease and one drug) and a few
/// disease–drug positives. Every relation gets roughly `density * n` edges.
pub fn random_graph(n: usize, density: f64, seed: u64) -> KnowledgeGraph {
    assert!(n >= 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kinds: Vec<NodeKind> = (0..n).map(|_| NodeKind::ALL[rng.gen_range(0..3)]).collect();
    kinds[0] = NodeKind::Disease;
    kinds[1] = NodeKind::Drug;
    kinds[2] = NodeKind::Gene;
    let of = |k: NodeKind| -> Vec<usize> { (0..n).filter(|&i| kinds[i] == k).collect() };
    let mut lists = Vec::new();
    for r in [
        RelationKind::DiseaseDisease,
        RelationKind::DiseaseGene,
        RelationKind::GeneGene,
        RelationKind::GeneDrug,
    ] {
        let (a, b) = r.endpoints().unwrap();
        let (la, lb) = (of(a), of(b));
        let m = (density * n as f64).ceil() as usize;
        let pairs: Vec<Pair> = (0..m)
            .map(|_| {
                (
                    NodeId(la[rng.gen_range(0..la.len())]),
                    NodeId(lb[rng.gen_range(0..lb.len())]),
                )
            })
            .collect();
        lists.push(EdgeList::from_pairs(r, pairs).0);
    }
    let (ds, cs) = (of(NodeKind::Disease), of(NodeKind::Drug));
    let mut positives: Vec<Pair> = (0..3)
        .map(|_| {
            (
                NodeId(ds[rng.gen_range(0..ds.len())]),
                NodeId(cs[rng.gen_range(0..cs.len())]),
            )
        })
        .collect();
    positives.sort();
    positives.dedup();
    let labels = (0..n).map(|i| format!("{}::n{i}", kinds[i].namespace())).collect();
    KnowledgeGraph::from_parts(labels, kinds, lists, RelationKind::DiseaseDrug, positives, false).unwrap()
}

/// All-pairs hop distances over the union of message-passing relations.
pub fn floyd_warshall(graph: &KnowledgeGraph) -> Vec<Vec<usize>> {
    let n = graph.n_nodes();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in graph.neighbors(NodeId(i)) {
            if j.0 != i {
                d[i][j.0] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}
