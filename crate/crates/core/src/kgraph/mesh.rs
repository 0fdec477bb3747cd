//! MeSH tree-number handling: disease label expansion, tree edges, and removal of
//! disease–gene edges that were propagated up the hierarchy.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dot-separated hierarchical code such as `C04.557.337`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeshTreeNumber(String);

impl MeshTreeNumber {
    pub fn new(code: impl Into<String>) -> Result<Self> {
        let code = code.into();
        let code = code.trim();
        if code.is_empty() || code.split('.').any(|seg| seg.is_empty()) || code.contains(char::is_whitespace) {
            return Err(Error::InvalidInput(format!("malformed tree number {code:?}")));
        }
        Ok(MeshTreeNumber(code.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Code with the last segment removed; `None` at a root.
    pub fn parent(&self) -> Option<MeshTreeNumber> {
        self.0.rfind('.').map(|pos| MeshTreeNumber(self.0[..pos].to_string()))
    }

    /// Strict ancestor by whole-segment prefix.
    pub fn is_ancestor_of(&self, other: &MeshTreeNumber) -> bool {
        other.0.len() > self.0.len() && other.0.starts_with(&self.0) && other.0.as_bytes()[self.0.len()] == b'.'
    }

    /// First segment, e.g. `C04` for `C04.557.337`.
    pub fn first_level(&self) -> &str {
        self.0.split('.').next().unwrap_or(&self.0)
    }

    /// Node label used in graphs.
    pub fn node_label(&self) -> String {
        format!("mesh::{}", self.0)
    }

    /// Inverse of [`node_label`](Self::node_label).
    pub fn from_node_label(label: &str) -> Option<Self> {
        label.strip_prefix("mesh::").and_then(|c| MeshTreeNumber::new(c).ok())
    }
}

impl fmt::Display for MeshTreeNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Disease label → tree numbers, read from a `label<TAB>tree_number` TSV.
#[derive(Debug, Clone, Default)]
pub struct MeshMapping {
    map: HashMap<String, BTreeSet<MeshTreeNumber>>,
}

impl MeshMapping {
    pub fn from_entries<I, S, T>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let mut map: HashMap<String, BTreeSet<MeshTreeNumber>> = HashMap::new();
        for (label, code) in entries {
            map.entry(label.into()).or_default().insert(MeshTreeNumber::new(code)?);
        }
        Ok(MeshMapping { map })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (k, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: k + 1,
                    message: format!("expected label<TAB>tree_number, found {} fields", fields.len()),
                });
            }
            entries.push((fields[0].trim().to_string(), fields[1].trim().to_string()));
        }
        Self::from_entries(entries).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })
    }

    pub fn get(&self, label: &str) -> Option<&BTreeSet<MeshTreeNumber>> {
        self.map.get(label)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Label → codes, restricted to `labels`, in label order.
    pub fn groups<'a>(&self, labels: impl IntoIterator<Item = &'a str>) -> BTreeMap<String, BTreeSet<MeshTreeNumber>> {
        labels
            .into_iter()
            .filter_map(|l| self.map.get(l).map(|c| (l.to_string(), c.clone())))
            .collect()
    }
}

/// Entities left out of a build, with reasons.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct SkipReport {
    pub entries: Vec<SkippedEntity>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SkippedEntity {
    pub label: String,
    pub reason: String,
}

impl SkipReport {
    pub fn push(&mut self, label: impl Into<String>, reason: impl Into<String>) {
        self.entries.push(SkippedEntity {
            label: label.into(),
            reason: reason.into(),
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// All tree numbers of a disease label. Unmapped labels yield an empty set and a
/// skip record.
pub fn mesh_expand(label: &str, mapping: &MeshMapping, skipped: &mut SkipReport) -> BTreeSet<MeshTreeNumber> {
    match mapping.get(label) {
        Some(codes) => codes.clone(),
        None => {
            skipped.push(label, "no MeSH tree number mapping");
            BTreeSet::new()
        }
    }
}

/// `(child, parent)` for every code whose immediate parent is also present.
pub fn mesh_tree_edges(codes: &BTreeSet<MeshTreeNumber>) -> Vec<(MeshTreeNumber, MeshTreeNumber)> {
    codes
        .iter()
        .filter_map(|c| {
            let p = c.parent()?;
            codes.contains(&p).then(|| (c.clone(), p))
        })
        .collect()
}

/// Drops a disease–gene edge when the same gene also links to a strict descendant
/// of that disease code. Input order is preserved for the survivors.
pub fn prune_upward_disease_gene<G>(edges: &[(MeshTreeNumber, G)]) -> Vec<(MeshTreeNumber, G)>
where
    G: Ord + Clone,
{
    let mut by_gene: BTreeMap<&G, Vec<&MeshTreeNumber>> = BTreeMap::new();
    for (code, gene) in edges {
        by_gene.entry(gene).or_default().push(code);
    }
    edges
        .iter()
        .filter(|(code, gene)| !by_gene[gene].iter().any(|other| code.is_ancestor_of(other)))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> MeshTreeNumber {
        MeshTreeNumber::new(s).unwrap()
    }

    fn set(codes: &[&str]) -> BTreeSet<MeshTreeNumber> {
        codes.iter().map(|c| t(c)).collect()
    }

    #[test]
    fn parent_and_ancestry() {
        assert_eq!(t("C04.557.337").parent(), Some(t("C04.557")));
        assert_eq!(t("C04").parent(), None);
        assert!(t("C04").is_ancestor_of(&t("C04.557.337")));
        assert!(!t("C04.55").is_ancestor_of(&t("C04.557")));
        assert!(!t("C04.557").is_ancestor_of(&t("C04.557")));
        assert_eq!(t("C04.557.337").first_level(), "C04");
    }

    #[test]
    fn malformed_codes() {
        assert!(MeshTreeNumber::new("").is_err());
        assert!(MeshTreeNumber::new("C04..1").is_err());
        assert!(MeshTreeNumber::new("C04.").is_err());
    }

    #[test]
    fn tree_edges_parent_rule() {
        assert_eq!(
            mesh_tree_edges(&set(&["C04.557", "C04.557.337"])),
            vec![(t("C04.557.337"), t("C04.557"))]
        );
        assert!(mesh_tree_edges(&set(&["C04.557.337"])).is_empty());
        let e = mesh_tree_edges(&set(&["C04", "C04.557", "C04.557.337"]));
        assert_eq!(e.len(), 2);
        assert!(!e.contains(&(t("C04.557.337"), t("C04"))));
    }

    #[test]
    fn prune_keeps_most_specific() {
        let e = vec![(t("C04.557"), "g1"), (t("C04.557.337"), "g1")];
        assert_eq!(prune_upward_disease_gene(&e), vec![(t("C04.557.337"), "g1")]);

        let e = vec![(t("C04.557"), "g1"), (t("C10.228"), "g1")];
        assert_eq!(prune_upward_disease_gene(&e), e);

        let e = vec![(t("C04"), "g1"), (t("C04.557"), "g1"), (t("C04.557.337"), "g1")];
        assert_eq!(prune_upward_disease_gene(&e), vec![(t("C04.557.337"), "g1")]);
    }

    #[test]
    fn prune_is_per_gene() {
        let e = vec![(t("C04"), "g2"), (t("C04.557"), "g1")];
        assert_eq!(prune_upward_disease_gene(&e), e);
    }

    #[test]
    fn expand_and_skip() {
        let m = MeshMapping::from_entries([
            ("Leukemia", "C04.557.337"),
            ("Leukemia", "C15.604.515"),
            ("Glioma", "C04.557.470.670"),
        ])
        .unwrap();
        let mut skipped = SkipReport::default();
        assert_eq!(mesh_expand("Leukemia", &m, &mut skipped).len(), 2);
        assert_eq!(mesh_expand("Glioma", &m, &mut skipped), set(&["C04.557.470.670"]));
        assert!(mesh_expand("Unknown", &m, &mut skipped).is_empty());
        assert_eq!(skipped.len(), 1);
        assert_eq!(skipped.entries[0].label, "Unknown");
    }

    #[test]
    fn node_label_round_trip() {
        let c = t("C04.557");
        assert_eq!(MeshTreeNumber::from_node_label(&c.node_label()), Some(c));
        assert_eq!(MeshTreeNumber::from_node_label("gene::C04"), None);
    }
}
