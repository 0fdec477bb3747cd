use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::mesh::{self, MeshMapping, MeshTreeNumber, SkipReport};
use super::{
    assemble, read_label_pairs, AssembleOptions, BuildReport, ComponentMode, EdgeList, KnowledgeGraph, LabelTable,
    NodeKind, RelationKind,
};
use crate::error::{Error, Result};

fn yes() -> bool {
    true
}

/// JSON manifest naming the inputs of a graph build. Relative paths resolve against
/// the manifest's own directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildManifest {
    pub target: RelationKind,
    pub relations: BTreeMap<RelationKind, PathBuf>,
    #[serde(default)]
    pub mesh_mapping: Option<PathBuf>,
    /// Add parent/child disease edges between tree numbers (needs `mesh_mapping`).
    #[serde(default = "yes")]
    pub mesh_tree_edges: bool,
    /// Remove disease–gene edges implied by a more specific disease (needs `mesh_mapping`).
    #[serde(default = "yes")]
    pub prune_upward: bool,
    #[serde(default)]
    pub component_mode: ComponentMode,
    #[serde(default)]
    pub normalize_adjacency: bool,
}

impl BuildManifest {
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: BuildManifest = serde_json::from_str(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((manifest, base))
    }

    /// Every input file, resolved.
    pub fn inputs(&self, base: &Path) -> Vec<PathBuf> {
        self.relations
            .values()
            .chain(self.mesh_mapping.iter())
            .map(|p| base.join(p))
            .collect()
    }
}

struct DiseaseResolver<'a> {
    mapping: Option<&'a MeshMapping>,
    skipped: SkipReport,
    seen_skips: HashSet<String>,
    codes: BTreeSet<MeshTreeNumber>,
}

impl DiseaseResolver<'_> {
    fn resolve(&mut self, raw: &str) -> Result<Vec<String>> {
        let Some(mapping) = self.mapping else {
            return Ok(vec![LabelTable::qualify(raw, NodeKind::Disease)]);
        };
        if let Some(code) = raw.strip_prefix("mesh::") {
            let code = MeshTreeNumber::new(code)?;
            self.codes.insert(code.clone());
            return Ok(vec![code.node_label()]);
        }
        let mut scratch = SkipReport::default();
        let codes = mesh::mesh_expand(raw, mapping, &mut scratch);
        if !scratch.is_empty() && self.seen_skips.insert(raw.to_string()) {
            self.skipped.entries.extend(scratch.entries);
        }
        self.codes.extend(codes.iter().cloned());
        Ok(codes.iter().map(MeshTreeNumber::node_label).collect())
    }
}

/// Reads every input named by the manifest and assembles the graph.
pub fn build_graph(manifest: &BuildManifest, base: &Path) -> Result<(KnowledgeGraph, BuildReport)> {
    if !manifest.relations.contains_key(&manifest.target) {
        return Err(Error::InvalidInput(format!(
            "manifest has no file for target relation {}",
            manifest.target
        )));
    }
    let mapping = manifest
        .mesh_mapping
        .as_ref()
        .map(|p| MeshMapping::load(&base.join(p)))
        .transpose()?;
    let mut resolver = DiseaseResolver {
        mapping: mapping.as_ref(),
        skipped: SkipReport::default(),
        seen_skips: HashSet::new(),
        codes: BTreeSet::new(),
    };

    let mut string_edges: Vec<(RelationKind, Vec<(String, String)>)> = Vec::new();
    for (&relation, rel_path) in &manifest.relations {
        let path = base.join(rel_path);
        let (src_kind, dst_kind) = relation
            .endpoints()
            .ok_or_else(|| Error::InvalidInput("self_loop cannot be listed in a manifest".into()))?;
        let mut pairs = Vec::new();
        for (_, a, b) in read_label_pairs(&path)? {
            let left = if src_kind == NodeKind::Disease {
                resolver.resolve(&a)?
            } else {
                vec![LabelTable::qualify(&a, src_kind)]
            };
            let right = if dst_kind == NodeKind::Disease {
                resolver.resolve(&b)?
            } else {
                vec![LabelTable::qualify(&b, dst_kind)]
            };
            for l in &left {
                for r in &right {
                    pairs.push((l.clone(), r.clone()));
                }
            }
        }
        if relation == RelationKind::DiseaseGene && mapping.is_some() && manifest.prune_upward {
            let before = pairs.len();
            let coded: Vec<(MeshTreeNumber, String)> = pairs
                .into_iter()
                .map(|(d, g)| {
                    let code = MeshTreeNumber::from_node_label(&d)
                        .ok_or_else(|| Error::InvalidInput(format!("disease {d} has no tree number")))?;
                    Ok((code, g))
                })
                .collect::<Result<_>>()?;
            pairs = mesh::prune_upward_disease_gene(&coded)
                .into_iter()
                .map(|(c, g)| (c.node_label(), g))
                .collect();
            log::info!("pruned {} upward disease-gene edges", before - pairs.len());
        }
        string_edges.push((relation, pairs));
    }

    if mapping.is_some() && manifest.mesh_tree_edges {
        let tree: Vec<(String, String)> = mesh::mesh_tree_edges(&resolver.codes)
            .into_iter()
            .map(|(c, p)| (c.node_label(), p.node_label()))
            .collect();
        if manifest.target == RelationKind::DiseaseDisease {
            log::warn!("target is disease_disease; MeSH tree edges are not added");
        } else {
            match string_edges
                .iter_mut()
                .find(|(r, _)| *r == RelationKind::DiseaseDisease)
            {
                Some((_, pairs)) => pairs.extend(tree),
                None => string_edges.push((RelationKind::DiseaseDisease, tree)),
            }
        }
    }

    let mut table = LabelTable::new();
    let mut lists = Vec::new();
    let mut self_pairs = 0;
    for (relation, pairs) in string_edges {
        let (src_kind, dst_kind) = relation.endpoints().expect("checked above");
        let mut ids = Vec::with_capacity(pairs.len());
        for (a, b) in &pairs {
            ids.push((table.intern(a, src_kind)?, table.intern(b, dst_kind)?));
        }
        let (el, selfs, _) = EdgeList::from_pairs(relation, ids);
        self_pairs += selfs;
        lists.push(el);
    }
    if self_pairs > 0 {
        log::warn!("rejected {self_pairs} self-pairs");
    }
    let options = AssembleOptions {
        component_mode: manifest.component_mode,
        normalize_adjacency: manifest.normalize_adjacency,
    };
    let (graph, mut report) = assemble(&table, &lists, manifest.target, options)?;
    report.skipped = resolver.skipped;
    Ok((graph, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn mesh_build_expands_prunes_and_links_tree() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "mesh.tsv",
            "Neoplasms\tC04\nLeukemia\tC04.557\nAML\tC04.557.337\nAML\tC15.604\n",
        );
        write(
            dir.path(),
            "dg.tsv",
            "Neoplasms\tFLT3\nLeukemia\tFLT3\nAML\tFLT3\nAML\tKIT\nMystery\tKIT\n",
        );
        write(dir.path(), "gg.tsv", "FLT3\tKIT\n");
        write(dir.path(), "gd.tsv", "FLT3\tsorafenib\n");
        write(dir.path(), "dd.tsv", "AML\tsorafenib\n");
        let manifest: BuildManifest = serde_json::from_str(
            r#"{"target":"disease_drug",
                "relations":{"disease_gene":"dg.tsv","gene_gene":"gg.tsv","gene_drug":"gd.tsv","disease_drug":"dd.tsv"},
                "mesh_mapping":"mesh.tsv"}"#,
        )
        .unwrap();
        let (g, report) = build_graph(&manifest, dir.path()).unwrap();
        // AML expands to two tree numbers, so two positives.
        assert_eq!(report.positives, 2);
        assert_eq!(report.skipped.entries.len(), 1);
        assert_eq!(report.skipped.entries[0].label, "Mystery");
        let flt3 = g.node("gene::FLT3").unwrap();
        let c04 = g.node("mesh::C04").unwrap();
        let c04557 = g.node("mesh::C04.557").unwrap();
        let aml = g.node("mesh::C04.557.337").unwrap();
        let dg = g.adjacency(RelationKind::DiseaseGene).unwrap();
        assert_eq!(dg.get(aml.0, flt3.0), 1.0);
        assert_eq!(dg.get(c04.0, flt3.0), 0.0);
        assert_eq!(dg.get(c04557.0, flt3.0), 0.0);
        let dd = g.adjacency(RelationKind::DiseaseDisease).unwrap();
        assert_eq!(dd.get(aml.0, c04557.0), 1.0);
        assert_eq!(dd.get(c04557.0, c04.0), 1.0);
        assert_eq!(dd.get(aml.0, c04.0), 0.0);
    }

    #[test]
    fn missing_target_file_in_manifest() {
        let manifest: BuildManifest =
            serde_json::from_str(r#"{"target":"disease_drug","relations":{"gene_gene":"gg.tsv"}}"#).unwrap();
        assert!(build_graph(&manifest, Path::new(".")).is_err());
    }
}
