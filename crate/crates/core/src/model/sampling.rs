use std::collections::HashSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::kgraph::{KnowledgeGraph, NodeId, Pair};

/// Attempts per output slot before giving up.
pub const RETRY_CAP: usize = 100;

/// Uniform sampler over kind-matched target pairs, minus an exclusion set.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    left: Vec<NodeId>,
    right: Vec<NodeId>,
    homogeneous: bool,
    excluded: HashSet<Pair>,
}

impl NegativeSampler {
    pub fn new<'a>(graph: &KnowledgeGraph, excluded: impl IntoIterator<Item = &'a Pair>) -> Self {
        let (lk, rk) = graph.target_kinds();
        let homogeneous = lk == rk;
        let mut s = NegativeSampler {
            left: graph.nodes_of_kind(lk),
            right: graph.nodes_of_kind(rk),
            homogeneous,
            excluded: HashSet::new(),
        };
        s.exclude(excluded);
        s
    }

    fn key(&self, (a, b): Pair) -> Pair {
        if self.homogeneous && b < a {
            (b, a)
        } else {
            (a, b)
        }
    }

    pub fn exclude<'a>(&mut self, pairs: impl IntoIterator<Item = &'a Pair>) {
        for &p in pairs {
            let k = self.key(p);
            self.excluded.insert(k);
        }
    }

    pub fn is_excluded(&self, p: Pair) -> bool {
        self.excluded.contains(&self.key(p))
    }

    /// `n` pairs drawn independently and uniformly from the eligible set.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Result<Vec<Pair>> {
        if n > 0 && (self.left.is_empty() || self.right.is_empty()) {
            return Err(Error::InvalidInput("graph lacks nodes of the target kinds".into()));
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let mut found = None;
            for _ in 0..RETRY_CAP {
                let a = self.left[rng.gen_range(0..self.left.len())];
                let b = self.right[rng.gen_range(0..self.right.len())];
                if a == b || self.is_excluded((a, b)) {
                    continue;
                }
                found = Some((a, b));
                break;
            }
            out.push(found.ok_or(Error::SamplingExhausted(RETRY_CAP))?);
        }
        Ok(out)
    }
}

/// Negatives for `positives`, excluding every known positive of the graph.
pub fn sample_negatives(graph: &KnowledgeGraph, positives: &[Pair], rng: &mut impl Rng) -> Result<Vec<Pair>> {
    let sampler = NegativeSampler::new(graph, graph.positives().iter().chain(positives));
    sampler.sample(positives.len(), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgraph::{EdgeList, NodeKind, RelationKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    /// Diseases 0..nd, drugs nd..nd+nc, one gene linked to everything.
    fn bipartite(nd: usize, nc: usize, positives: Vec<(usize, usize)>) -> KnowledgeGraph {
        let gene = nd + nc;
        let mut labels = Vec::new();
        let mut kinds = Vec::new();
        for i in 0..nd {
            labels.push(format!("disease::{i}"));
            kinds.push(NodeKind::Disease);
        }
        for i in 0..nc {
            labels.push(format!("drug::{i}"));
            kinds.push(NodeKind::Drug);
        }
        labels.push("gene::g".into());
        kinds.push(NodeKind::Gene);
        let (dg, _, _) = EdgeList::from_pairs(RelationKind::DiseaseGene, (0..nd).map(|i| (NodeId(i), NodeId(gene))));
        let (gd, _, _) = EdgeList::from_pairs(RelationKind::GeneDrug, (nd..nd + nc).map(|i| (NodeId(gene), NodeId(i))));
        KnowledgeGraph::from_parts(
            labels,
            kinds,
            vec![dg, gd],
            RelationKind::DiseaseDrug,
            positives.into_iter().map(|(a, b)| (NodeId(a), NodeId(b))).collect(),
            false,
        )
        .unwrap()
    }

    #[test]
    fn forced_single_remaining_pair() {
        let g = bipartite(2, 2, vec![(0, 2), (0, 3), (1, 2)]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let neg = sample_negatives(&g, g.positives(), &mut rng).unwrap();
        assert_eq!(neg, vec![(NodeId(1), NodeId(3)); 3]);
    }

    #[test]
    fn kinds_always_match_target() {
        let g = bipartite(5, 7, vec![(0, 5), (1, 6)]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = NegativeSampler::new(&g, g.positives());
        for (a, b) in s.sample(500, &mut rng).unwrap() {
            assert_eq!(g.kind(a), NodeKind::Disease);
            assert_eq!(g.kind(b), NodeKind::Drug);
            assert!(!g.positives().contains(&(a, b)));
        }
    }

    #[test]
    fn exhausted_when_everything_is_positive() {
        let g = bipartite(1, 2, vec![(0, 1), (0, 2)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_negatives(&g, g.positives(), &mut rng),
            Err(Error::SamplingExhausted(_))
        ));
    }

    #[test]
    fn uniform_over_eligible_pairs_chi_square() {
        // 3 diseases x 3 drugs, 2 positives -> 7 eligible pairs.
        let g = bipartite(3, 3, vec![(0, 3), (1, 4)]);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let s = NegativeSampler::new(&g, g.positives());
        let n = 100_000;
        let mut counts: HashMap<Pair, usize> = HashMap::new();
        for p in s.sample(n, &mut rng).unwrap() {
            *counts.entry(p).or_default() += 1;
        }
        assert_eq!(counts.len(), 7);
        let expected = n as f64 / 7.0;
        let sigma = (expected * (1.0 - 1.0 / 7.0)).sqrt();
        let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        for &c in counts.values() {
            assert!((c as f64 - expected).abs() < 3.0 * sigma, "count {c}");
        }
        // chi-square with 6 dof, 0.999 quantile = 22.46
        assert!(chi2 < 22.46, "chi2 {chi2}");
    }
}
