use std::collections::HashMap;
use std::fs;
use std::path::Path;

use log::{info, warn};

use super::{EdgeList, NodeId, NodeKind, RelationKind};
use crate::error::{Error, Result};

/// Interns `namespace::name` labels to dense node ids.
#[derive(Debug, Clone, Default)]
pub struct LabelTable {
    labels: Vec<String>,
    kinds: Vec<NodeKind>,
    index: HashMap<String, NodeId>,
}

impl LabelTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Prefixes the kind namespace unless the label already carries one.
    pub fn qualify(raw: &str, kind: NodeKind) -> String {
        if raw.contains("::") {
            raw.to_string()
        } else {
            format!("{}::{}", kind.namespace(), raw)
        }
    }

    pub fn intern(&mut self, label: &str, kind: NodeKind) -> Result<NodeId> {
        let label = Self::qualify(label, kind);
        if let Some(&id) = self.index.get(&label) {
            let existing = self.kinds[id.0];
            if existing != kind {
                return Err(Error::InvalidInput(format!(
                    "label {label} used as both {existing} and {kind}"
                )));
            }
            return Ok(id);
        }
        let id = NodeId(self.labels.len());
        self.index.insert(label.clone(), id);
        self.labels.push(label);
        self.kinds.push(kind);
        Ok(id)
    }

    pub fn get(&self, label: &str) -> Option<NodeId> {
        self.index.get(label).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.labels[id.0]
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.kinds[id.0]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }
}

/// Reads `source<TAB>target` lines. Blank lines and `#` comments are skipped.
/// Returns `(line number, source, target)` triples.
pub fn read_label_pairs(path: &Path) -> Result<Vec<(usize, String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 || fields.iter().any(|f| f.trim().is_empty()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected 2 tab-separated fields, found {}", fields.len()),
            });
        }
        out.push((line_no, fields[0].trim().to_string(), fields[1].trim().to_string()));
    }
    if out.is_empty() {
        return Err(Error::EmptyEdgeList(path.to_path_buf()));
    }
    Ok(out)
}

/// Parses one relation's edge file, interning labels with the relation's endpoint kinds.
pub fn parse_edge_file(path: &Path, relation: RelationKind, table: &mut LabelTable) -> Result<EdgeList> {
    let (src_kind, dst_kind) = relation
        .endpoints()
        .ok_or_else(|| Error::InvalidInput("self_loop edges are implicit and cannot be read from a file".into()))?;
    let raw = read_label_pairs(path)?;
    let mut pairs = Vec::with_capacity(raw.len());
    for (line, a, b) in &raw {
        let ia = table.intern(a, src_kind).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: *line,
            message: e.to_string(),
        })?;
        let ib = table.intern(b, dst_kind).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: *line,
            message: e.to_string(),
        })?;
        if ia == ib {
            warn!("{}:{}: self-pair {} rejected", path.display(), line, a);
        }
        pairs.push((ia, ib));
    }
    let (list, _, dups) = EdgeList::from_pairs(relation, pairs);
    if dups > 0 {
        info!("{}: collapsed {} duplicate edges", path.display(), dups);
    }
    Ok(list)
}
