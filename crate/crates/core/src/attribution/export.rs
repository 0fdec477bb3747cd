//! Writers for the attributed neighbourhood of a predicted edge.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::AttributionReport;
use crate::error::{Error, Result};
use crate::kgraph::{KnowledgeGraph, NodeKind, RelationKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViewNode {
    pub id: usize,
    pub label: String,
    pub kind: NodeKind,
    pub ig: f64,
    /// `ig / max ig`, in `[0, 1]`.
    pub size: f64,
    pub top_gene: bool,
    pub endpoint: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViewEdge {
    pub source: usize,
    pub target: usize,
    pub relation: RelationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictedEdge {
    pub source: usize,
    pub target: usize,
    pub score: f64,
    /// Not present among the graph's known positives.
    pub novel: bool,
}

/// Attributed nodes, the graph edges among them, and the scored edge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgraphView {
    pub nodes: Vec<ViewNode>,
    pub edges: Vec<ViewEdge>,
    pub predicted: PredictedEdge,
}

impl SubgraphView {
    pub fn new(graph: &KnowledgeGraph, report: &AttributionReport) -> Self {
        let max_ig = report.contributions.iter().map(|c| c.ig).fold(0.0, f64::max);
        let top = report.top_gene();
        let mut members: Vec<_> = report.contributions.iter().collect();
        members.sort_by_key(|c| c.node);
        let nodes: Vec<ViewNode> = members
            .iter()
            .map(|c| ViewNode {
                id: c.node.0,
                label: graph.label(c.node).to_string(),
                kind: c.kind,
                ig: c.ig,
                size: if max_ig > 0.0 { c.ig / max_ig } else { 0.0 },
                top_gene: Some(c.node) == top,
                endpoint: c.node == report.edge.0 || c.node == report.edge.1,
            })
            .collect();
        let inside: std::collections::BTreeSet<usize> = nodes.iter().map(|n| n.id).collect();
        let mut edges = Vec::new();
        for (r, csr) in graph.relations() {
            if *r == RelationKind::SelfLoop {
                continue;
            }
            for &a in &inside {
                for &b in csr.row_indices(a) {
                    if a < b && inside.contains(&b) {
                        edges.push(ViewEdge {
                            source: a,
                            target: b,
                            relation: *r,
                        });
                    }
                }
            }
        }
        let (i, j) = report.edge;
        let novel = !graph
            .positives()
            .iter()
            .any(|&(a, b)| (a, b) == (i, j) || (a, b) == (j, i));
        SubgraphView {
            nodes,
            edges,
            predicted: PredictedEdge {
                source: i.0,
                target: j.0,
                score: report.score,
                novel,
            },
        }
    }
}

pub trait SubgraphExporter: Send + Sync {
    fn name(&self) -> &'static str;
    fn extension(&self) -> &'static str;
    fn render(&self, view: &SubgraphView) -> Result<String>;
}

struct Dot;
struct GraphMl;
struct Json;

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

impl SubgraphExporter for Dot {
    fn name(&self) -> &'static str {
        "dot"
    }
    fn extension(&self) -> &'static str {
        "dot"
    }
    fn render(&self, view: &SubgraphView) -> Result<String> {
        let mut s = String::from("graph attribution {\n");
        for n in &view.nodes {
            let _ = writeln!(
                s,
                "  n{} [label={}, kind={}, ig={:e}, size={:.6}, top_gene={}, penwidth={}];",
                n.id,
                dot_quote(&n.label),
                dot_quote(n.kind.as_str()),
                n.ig,
                n.size,
                n.top_gene,
                if n.top_gene { 3 } else { 1 }
            );
        }
        for e in &view.edges {
            let _ = writeln!(
                s,
                "  n{} -- n{} [relation={}];",
                e.source,
                e.target,
                dot_quote(e.relation.as_str())
            );
        }
        let p = &view.predicted;
        let _ = writeln!(
            s,
            "  n{} -- n{} [style=dashed, predicted=true, score={:e}, novel={}];",
            p.source, p.target, p.score, p.novel
        );
        s.push_str("}\n");
        Ok(s)
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

impl SubgraphExporter for GraphMl {
    fn name(&self) -> &'static str {
        "graphml"
    }
    fn extension(&self) -> &'static str {
        "graphml"
    }
    fn render(&self, view: &SubgraphView) -> Result<String> {
        let mut s = String::from(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n",
        );
        for (id, target, ty) in [
            ("label", "node", "string"),
            ("kind", "node", "string"),
            ("ig", "node", "double"),
            ("size", "node", "double"),
            ("top_gene", "node", "boolean"),
            ("relation", "edge", "string"),
            ("style", "edge", "string"),
            ("score", "edge", "double"),
            ("novel", "edge", "boolean"),
        ] {
            let _ = writeln!(
                s,
                "  <key id=\"{id}\" for=\"{target}\" attr.name=\"{id}\" attr.type=\"{ty}\"/>"
            );
        }
        s.push_str("  <graph id=\"attribution\" edgedefault=\"undirected\">\n");
        for n in &view.nodes {
            let _ = writeln!(s, "    <node id=\"n{}\">", n.id);
            let _ = writeln!(s, "      <data key=\"label\">{}</data>", xml_escape(&n.label));
            let _ = writeln!(s, "      <data key=\"kind\">{}</data>", n.kind.as_str());
            let _ = writeln!(s, "      <data key=\"ig\">{:e}</data>", n.ig);
            let _ = writeln!(s, "      <data key=\"size\">{}</data>", n.size);
            let _ = writeln!(s, "      <data key=\"top_gene\">{}</data>", n.top_gene);
            s.push_str("    </node>\n");
        }
        for e in &view.edges {
            let _ = writeln!(
                s,
                "    <edge source=\"n{}\" target=\"n{}\"><data key=\"relation\">{}</data><data key=\"style\">solid</data></edge>",
                e.source,
                e.target,
                e.relation.as_str()
            );
        }
        let p = &view.predicted;
        let _ = writeln!(
            s,
            "    <edge source=\"n{}\" target=\"n{}\"><data key=\"relation\">predicted</data><data key=\"style\">dashed</data><data key=\"score\">{:e}</data><data key=\"novel\">{}</data></edge>",
            p.source, p.target, p.score, p.novel
        );
        s.push_str("  </graph>\n</graphml>\n");
        Ok(s)
    }
}

impl SubgraphExporter for Json {
    fn name(&self) -> &'static str {
        "json"
    }
    fn extension(&self) -> &'static str {
        "json"
    }
    fn render(&self, view: &SubgraphView) -> Result<String> {
        Ok(serde_json::to_string_pretty(view)? + "\n")
    }
}

/// Exporters selectable by name.
pub struct ExporterRegistry {
    exporters: BTreeMap<&'static str, Box<dyn SubgraphExporter>>,
}

impl ExporterRegistry {
    pub fn empty() -> Self {
        ExporterRegistry {
            exporters: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(Dot));
        reg.register(Box::new(GraphMl));
        reg.register(Box::new(Json));
        reg
    }

    pub fn register(&mut self, exporter: Box<dyn SubgraphExporter>) {
        self.exporters.insert(exporter.name(), exporter);
    }

    pub fn get(&self, name: &str) -> Result<&dyn SubgraphExporter> {
        self.exporters
            .get(name)
            .map(|e| e.as_ref())
            .ok_or_else(|| Error::Unknown {
                what: "export format",
                name: name.to_string(),
            })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.exporters.keys().copied()
    }
}

impl Default for ExporterRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

pub fn export_subgraph(
    graph: &KnowledgeGraph,
    report: &AttributionReport,
    exporter: &dyn SubgraphExporter,
    path: &Path,
) -> Result<()> {
    let text = exporter.render(&SubgraphView::new(graph, report))?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
