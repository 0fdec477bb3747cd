//! Planted-association benchmark graphs with known mediators.
//!
//! Diseases and drugs are split into `M = min(n_disease, n_drug) / 4` modules
//! (disease `i` and drug `j` go to modules `i % M` and `j % M`), and module `m` gets
//! gene `m` as its mediator. Every disease–drug pair inside a module is a planted
//! positive. With probability `mediator_fraction` a positive is wired through its
//! mediator with a disease–gene and a gene–drug edge. Chains over all genes and over
//! all diseases keep the graph connected; a disease or drug left without any gene
//! edge is attached to a random non-mediator gene. Finally each message-passing
//! relation receives `round(noise_edges * planted edge count)` extra uniform random
//! edges.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kgraph::{EdgeList, KnowledgeGraph, NodeId, NodeKind, Pair, RelationKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_disease: usize,
    pub n_drug: usize,
    pub n_gene: usize,
    pub mediator_fraction: f64,
    /// Extra random edges per relation, as a fraction of that relation's planted edges.
    pub noise_edges: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_disease: 200,
            n_drug: 200,
            n_gene: 500,
            mediator_fraction: 0.8,
            noise_edges: 0.1,
            seed: 0,
        }
    }
}

/// Ground truth of a generated graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub positives: Vec<Pair>,
    /// Positive pair → the gene wired between its endpoints.
    pub mediators: BTreeMap<Pair, NodeId>,
}

impl PlantedTruth {
    pub fn mediated_positives(&self) -> impl Iterator<Item = (Pair, NodeId)> + '_ {
        self.mediators.iter().map(|(&p, &g)| (p, g))
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticGraph {
    pub graph: KnowledgeGraph,
    pub truth: PlantedTruth,
    pub relations: Vec<EdgeList>,
}

fn label(kind: NodeKind, i: usize) -> String {
    let prefix = match kind {
        NodeKind::Disease => "D",
        NodeKind::Drug => "C",
        NodeKind::Gene => "G",
    };
    format!("{}::{prefix}{i:04}", kind.namespace())
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticGraph> {
    let SyntheticSpec {
        n_disease,
        n_drug,
        n_gene,
        mediator_fraction,
        noise_edges,
        seed,
    } = *spec;
    if n_disease < 2 || n_drug < 2 || n_gene < 2 {
        return Err(Error::InvalidInput(
            "synthetic graphs need at least 2 nodes of each kind".into(),
        ));
    }
    if !(0.0..=1.0).contains(&mediator_fraction) {
        return Err(Error::InvalidInput(format!(
            "mediator_fraction {mediator_fraction} is outside [0, 1]"
        )));
    }
    if !(noise_edges >= 0.0 && noise_edges.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "noise_edges {noise_edges} must be a non-negative fraction"
        )));
    }
    let modules = (n_disease.min(n_drug) / 4).max(1);
    if modules > n_gene {
        return Err(Error::InvalidInput(format!(
            "{modules} modules need as many mediator genes, only {n_gene} genes requested"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let disease = |i: usize| NodeId(i);
    let drug = |j: usize| NodeId(n_disease + j);
    let gene = |g: usize| NodeId(n_disease + n_drug + g);
    let mut labels = Vec::with_capacity(n_disease + n_drug + n_gene);
    let mut kinds = Vec::with_capacity(labels.capacity());
    for (kind, n) in [
        (NodeKind::Disease, n_disease),
        (NodeKind::Drug, n_drug),
        (NodeKind::Gene, n_gene),
    ] {
        for i in 0..n {
            labels.push(label(kind, i));
            kinds.push(kind);
        }
    }

    let mut positives = Vec::new();
    let mut mediators = BTreeMap::new();
    let mut dg: Vec<Pair> = Vec::new();
    let mut gc: Vec<Pair> = Vec::new();
    let mut dg_seen = HashSet::new();
    let mut gc_seen = HashSet::new();
    for d in 0..n_disease {
        for c in (0..n_drug).filter(|c| c % modules == d % modules) {
            let pair = (disease(d), drug(c));
            positives.push(pair);
            if rng.gen::<f64>() < mediator_fraction {
                let g = gene(d % modules);
                mediators.insert(pair, g);
                if dg_seen.insert((pair.0, g)) {
                    dg.push((pair.0, g));
                }
                if gc_seen.insert((g, pair.1)) {
                    gc.push((g, pair.1));
                }
            }
        }
    }
    let attach = |rng: &mut ChaCha8Rng| {
        if n_gene > modules {
            gene(rng.gen_range(modules..n_gene))
        } else {
            gene(rng.gen_range(0..n_gene))
        }
    };
    for d in 0..n_disease {
        if !dg.iter().any(|p| p.0 == disease(d)) {
            dg.push((disease(d), attach(&mut rng)));
        }
    }
    for c in 0..n_drug {
        if !gc.iter().any(|p| p.1 == drug(c)) {
            gc.push((attach(&mut rng), drug(c)));
        }
    }
    let gg: Vec<Pair> = (1..n_gene).map(|g| (gene(g - 1), gene(g))).collect();
    let dd: Vec<Pair> = (1..n_disease).map(|d| (disease(d - 1), disease(d))).collect();

    let mut relations = Vec::new();
    for (relation, mut pairs) in [
        (RelationKind::DiseaseDisease, dd),
        (RelationKind::DiseaseGene, dg),
        (RelationKind::GeneGene, gg),
        (RelationKind::GeneDrug, gc),
    ] {
        let (left, right) = relation.endpoints().expect("association relation");
        let range = |k: NodeKind| match k {
            NodeKind::Disease => 0..n_disease,
            NodeKind::Drug => n_disease..n_disease + n_drug,
            NodeKind::Gene => n_disease + n_drug..n_disease + n_drug + n_gene,
        };
        let (lr, rr) = (range(left), range(right));
        let possible = if relation.is_homogeneous() {
            lr.len() * (lr.len() - 1) / 2
        } else {
            lr.len() * rr.len()
        };
        let n_noise = (noise_edges * pairs.len() as f64).round() as usize;
        if pairs.len() + n_noise > possible {
            return Err(Error::InvalidInput(format!(
                "{n_noise} noise edges do not fit in relation {relation} ({} planted of {possible} possible)",
                pairs.len()
            )));
        }
        let canon = |(a, b): Pair| {
            if relation.is_homogeneous() && b < a {
                (b, a)
            } else {
                (a, b)
            }
        };
        let mut present: HashSet<Pair> = pairs.iter().copied().map(canon).collect();
        let mut added = 0;
        while added < n_noise {
            let p = canon((NodeId(rng.gen_range(lr.clone())), NodeId(rng.gen_range(rr.clone()))));
            if p.0 != p.1 && present.insert(p) {
                pairs.push(p);
                added += 1;
            }
        }
        relations.push(EdgeList::from_pairs(relation, pairs).0);
    }

    let graph = KnowledgeGraph::from_parts(
        labels,
        kinds,
        relations.clone(),
        RelationKind::DiseaseDrug,
        positives.clone(),
        false,
    )?;
    Ok(SyntheticGraph {
        graph,
        truth: PlantedTruth { positives, mediators },
        relations,
    })
}

impl SyntheticGraph {
    /// Writes one edge TSV per relation, the positives, a build manifest that
    /// references them, the planted truth as JSON and a mediator record file.
    pub fn write_inputs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let g = &self.graph;
        let write_pairs = |name: &str, pairs: &[Pair]| -> Result<()> {
            let path = dir.join(name);
            let mut s = String::new();
            for &(a, b) in pairs {
                s.push_str(g.label(a));
                s.push('\t');
                s.push_str(g.label(b));
                s.push('\n');
            }
            fs::write(&path, s).map_err(|e| Error::io(&path, e))
        };
        let mut manifest_relations = serde_json::Map::new();
        for el in &self.relations {
            let name = format!("{}.tsv", el.relation.as_str());
            write_pairs(&name, &el.pairs)?;
            manifest_relations.insert(el.relation.as_str().into(), name.into());
        }
        let target = g.target();
        let name = format!("{}.tsv", target.as_str());
        write_pairs(&name, &self.truth.positives)?;
        manifest_relations.insert(target.as_str().into(), name.into());
        let manifest = serde_json::json!({
            "target": target.as_str(),
            "relations": manifest_relations,
        });
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&path, e))?;

        let truth: Vec<serde_json::Value> = self
            .truth
            .positives
            .iter()
            .map(|p| {
                serde_json::json!({
                    "disease": g.label(p.0),
                    "drug": g.label(p.1),
                    "mediator": self.truth.mediators.get(p).map(|m| g.label(*m)),
                })
            })
            .collect();
        let path = dir.join("truth.json");
        fs::write(&path, serde_json::to_string_pretty(&truth)? + "\n").map_err(|e| Error::io(&path, e))?;

        let path = dir.join("records.tsv");
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        for (p, m) in self.truth.mediated_positives() {
            writeln!(f, "{}\t{}\t{}", g.label(p.0), g.label(p.1), g.label(m)).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mf: f64, noise: f64, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n_disease: 12,
            n_drug: 10,
            n_gene: 30,
            mediator_fraction: mf,
            noise_edges: noise,
            seed,
        }
    }

    #[test]
    fn seeded() {
        let a = generate_synthetic(&small(0.8, 0.1, 3)).unwrap();
        let b = generate_synthetic(&small(0.8, 0.1, 3)).unwrap();
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.graph.digest(), b.graph.digest());
        let c = generate_synthetic(&small(0.8, 0.1, 4)).unwrap();
        assert_ne!(a.graph.digest(), c.graph.digest());
    }

    #[test]
    fn connected() {
        for seed in 0..5 {
            let s = generate_synthetic(&small(0.5, 0.0, seed)).unwrap();
            let dist = s.graph.distances_from(&[NodeId(0)], None);
            assert!(dist.iter().all(|d| d.is_some()), "seed {seed}");
        }
    }

    #[test]
    fn all_mediated_single_candidate() {
        let s = generate_synthetic(&small(1.0, 0.0, 1)).unwrap();
        assert_eq!(s.truth.mediators.len(), s.truth.positives.len());
        for (p, m) in s.truth.mediated_positives() {
            let genes: HashSet<NodeId> = s
                .graph
                .neighbors(p.0)
                .into_iter()
                .chain(s.graph.neighbors(p.1))
                .filter(|&n| s.graph.kind(n) == NodeKind::Gene)
                .collect();
            assert_eq!(genes, HashSet::from([m]));
        }
    }

    #[test]
    fn noise_counts() {
        let clean = generate_synthetic(&small(1.0, 0.0, 2)).unwrap();
        let noisy = generate_synthetic(&small(1.0, 0.5, 2)).unwrap();
        for (a, b) in clean.relations.iter().zip(&noisy.relations) {
            assert_eq!(b.len(), a.len() + (0.5 * a.len() as f64).round() as usize);
        }
    }

    #[test]
    fn infeasible_noise() {
        let spec = SyntheticSpec {
            n_disease: 2,
            n_drug: 2,
            n_gene: 2,
            mediator_fraction: 1.0,
            noise_edges: 50.0,
            seed: 0,
        };
        assert!(generate_synthetic(&spec).is_err());
    }

    #[test]
    fn positives_stay_within_modules() {
        let s = generate_synthetic(&small(0.0, 0.0, 0)).unwrap();
        assert!(s.truth.mediators.is_empty());
        // 2 modules: diseases 12 → {6,6}, drugs 10 → {5,5}
        assert_eq!(s.truth.positives.len(), 2 * 6 * 5);
    }
}
