//! Binary graph bundle: `KGXGRAPH`, u32 version, then little-endian fields. Adjacency
//! is stored as undirected pairs and rebuilt (and re-normalized) on load.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{EdgeList, KnowledgeGraph, NodeId, NodeKind, RelationKind};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"KGXGRAPH";
pub const BUNDLE_VERSION: u32 = 1;

fn put_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_u64(w: &mut impl Write, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(super) fn encode(g: &KnowledgeGraph, w: &mut impl Write) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    put_u32(w, BUNDLE_VERSION)?;
    w.write_all(&[g.target.code(), g.normalized as u8])?;
    put_u64(w, g.n_nodes() as u64)?;
    for (label, kind) in g.labels.iter().zip(&g.kinds) {
        w.write_all(&[kind.code()])?;
        put_u32(w, label.len() as u32)?;
        w.write_all(label.as_bytes())?;
    }
    let rels: Vec<_> = g
        .relations
        .iter()
        .filter(|(r, _)| *r != RelationKind::SelfLoop)
        .collect();
    put_u32(w, rels.len() as u32)?;
    for (r, a) in rels {
        w.write_all(&[r.code()])?;
        let pairs = a.upper_pairs();
        put_u64(w, pairs.len() as u64)?;
        for (i, j) in pairs {
            put_u64(w, i as u64)?;
            put_u64(w, j as u64)?;
        }
    }
    put_u64(w, g.positives.len() as u64)?;
    for &(a, b) in &g.positives {
        put_u64(w, a.0 as u64)?;
        put_u64(w, b.0 as u64)?;
    }
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() < n {
            return Err(Error::Format("graph bundle truncated".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn index(&mut self, n: usize) -> Result<NodeId> {
        let v = self.u64()? as usize;
        if v >= n {
            return Err(Error::Format(format!("node index {v} out of range")));
        }
        Ok(NodeId(v))
    }
}

pub(super) fn decode(bytes: &[u8]) -> Result<KnowledgeGraph> {
    let mut r = Reader { buf: bytes };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not a graph bundle".into()));
    }
    let version = r.u32()?;
    if version != BUNDLE_VERSION {
        return Err(Error::Format(format!("unsupported bundle version {version}")));
    }
    let target = RelationKind::from_code(r.u8()?).ok_or(Error::Format("bad target relation".into()))?;
    let normalized = r.u8()? != 0;
    let n = r.u64()? as usize;
    let mut labels = Vec::with_capacity(n.min(1 << 24));
    let mut kinds = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        kinds.push(NodeKind::from_code(r.u8()?).ok_or(Error::Format("bad node kind".into()))?);
        let len = r.u32()? as usize;
        let s = std::str::from_utf8(r.take(len)?).map_err(|e| Error::Format(e.to_string()))?;
        labels.push(s.to_string());
    }
    let n_rel = r.u32()?;
    let mut lists = Vec::new();
    for _ in 0..n_rel {
        let relation = RelationKind::from_code(r.u8()?).ok_or(Error::Format("bad relation".into()))?;
        let m = r.u64()? as usize;
        let mut pairs = Vec::with_capacity(m.min(1 << 24));
        for _ in 0..m {
            pairs.push((r.index(n)?, r.index(n)?));
        }
        lists.push(EdgeList { relation, pairs });
    }
    let p = r.u64()? as usize;
    let mut positives = Vec::with_capacity(p.min(1 << 24));
    for _ in 0..p {
        positives.push((r.index(n)?, r.index(n)?));
    }
    if !r.buf.is_empty() {
        return Err(Error::Format("trailing bytes after graph bundle".into()));
    }
    KnowledgeGraph::from_parts(labels, kinds, lists, target, positives, normalized)
}

pub fn write_bundle(g: &KnowledgeGraph, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    encode(g, &mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_bundle(path: &Path) -> Result<KnowledgeGraph> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
