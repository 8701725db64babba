//! Typed heterogeneous graph of publishers, news and users.
//!
//! Node ids are opaque strings mapped to dense indices in insertion order;
//! the mapping is kept so that exports and serialization are stable.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeType {
    Publisher,
    News,
    User,
}

impl NodeType {
    pub const ALL: [NodeType; 3] = [NodeType::Publisher, NodeType::News, NodeType::User];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeType::Publisher => "publisher",
            NodeType::News => "news",
            NodeType::User => "user",
        }
    }
}

impl FromStr for NodeType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "publisher" => Ok(NodeType::Publisher),
            "news" => Ok(NodeType::News),
            "user" => Ok(NodeType::User),
            other => Err(Error::Schema(format!("unknown node type `{other}`"))),
        }
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeType {
    /// publisher -> publisher
    Citation,
    /// publisher -> news
    Publication,
    /// user -> news, timestamped
    Tweet,
    /// user -> user
    Following,
}

impl EdgeType {
    pub const ALL: [EdgeType; 4] = [
        EdgeType::Citation,
        EdgeType::Publication,
        EdgeType::Tweet,
        EdgeType::Following,
    ];

    /// `(source type, destination type)` required by the relation.
    pub fn signature(self) -> (NodeType, NodeType) {
        match self {
            EdgeType::Citation => (NodeType::Publisher, NodeType::Publisher),
            EdgeType::Publication => (NodeType::Publisher, NodeType::News),
            EdgeType::Tweet => (NodeType::User, NodeType::News),
            EdgeType::Following => (NodeType::User, NodeType::User),
        }
    }

    pub fn requires_timestamp(self) -> bool {
        self == EdgeType::Tweet
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeType::Citation => "citation",
            EdgeType::Publication => "publication",
            EdgeType::Tweet => "tweet",
            EdgeType::Following => "following",
        }
    }
}

impl FromStr for EdgeType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "citation" => Ok(EdgeType::Citation),
            "publication" => Ok(EdgeType::Publication),
            "tweet" => Ok(EdgeType::Tweet),
            "following" => Ok(EdgeType::Following),
            other => Err(Error::Schema(format!("unknown edge type `{other}`"))),
        }
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Veracity label of a news node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Real = 0,
    Fake = 1,
}

impl Label {
    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Label::Real),
            1 => Ok(Label::Fake),
            other => Err(Error::Schema(format!("label must be 0 or 1, got {other}"))),
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeType,
    /// Seconds since the epoch; present exactly on tweet edges.
    pub timestamp: Option<i64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HeteroGraph {
    ids: Vec<String>,
    types: Vec<NodeType>,
    index: HashMap<String, usize>,
    edges: Vec<Edge>,
    incident: Vec<Vec<usize>>,
    labels: BTreeMap<usize, Label>,
}

impl HeteroGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: &str, node_type: NodeType) -> Result<usize> {
        if self.index.contains_key(id) {
            return Err(Error::Conflict(format!("node `{id}` already exists")));
        }
        let idx = self.ids.len();
        self.ids.push(id.to_string());
        self.types.push(node_type);
        self.index.insert(id.to_string(), idx);
        self.incident.push(Vec::new());
        Ok(idx)
    }

    fn resolve(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::NotFound(format!("node `{id}`")))
    }

    pub fn add_edge(
        &mut self,
        src: &str,
        dst: &str,
        kind: EdgeType,
        timestamp: Option<i64>,
    ) -> Result<()> {
        let s = self.resolve(src)?;
        let d = self.resolve(dst)?;
        let (want_src, want_dst) = kind.signature();
        if self.types[s] != want_src || self.types[d] != want_dst {
            return Err(Error::Schema(format!(
                "{kind} edge requires {want_src} -> {want_dst}, got {src} ({}) -> {dst} ({})",
                self.types[s], self.types[d]
            )));
        }
        match (kind.requires_timestamp(), timestamp) {
            (true, None) => {
                return Err(Error::Schema(format!(
                    "{kind} edge {src} -> {dst} requires a timestamp"
                )))
            }
            (false, Some(_)) => {
                return Err(Error::Schema(format!(
                    "{kind} edge {src} -> {dst} must not carry a timestamp"
                )))
            }
            _ => {}
        }
        let e = self.edges.len();
        self.edges.push(Edge {
            src: s,
            dst: d,
            kind,
            timestamp,
        });
        self.incident[s].push(e);
        if d != s {
            self.incident[d].push(e);
        }
        Ok(())
    }

    /// Stores a symmetric relation as two directed edges.
    pub fn add_bidirectional(&mut self, a: &str, b: &str, kind: EdgeType) -> Result<()> {
        let (s, d) = kind.signature();
        if s != d {
            return Err(Error::Schema(format!("{kind} edges cannot be bidirectional")));
        }
        self.add_edge(a, b, kind, None)?;
        self.add_edge(b, a, kind, None)
    }

    pub fn set_label(&mut self, id: &str, label: Label) -> Result<()> {
        let idx = self.resolve(id)?;
        if self.types[idx] != NodeType::News {
            return Err(Error::Schema(format!(
                "labels attach to news nodes only; `{id}` is a {}",
                self.types[idx]
            )));
        }
        self.labels.insert(idx, label);
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_type(&self, id: &str) -> Option<NodeType> {
        self.index.get(id).map(|&i| self.types[i])
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.ids[idx]
    }

    pub fn type_at(&self, idx: usize) -> NodeType {
        self.types[idx]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&str, NodeType)> + '_ {
        self.ids.iter().map(String::as_str).zip(self.types.iter().copied())
    }

    pub fn nodes_of_type(&self, t: NodeType) -> impl Iterator<Item = &str> + '_ {
        self.nodes().filter(move |(_, nt)| *nt == t).map(|(id, _)| id)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edges touching node `idx`, in insertion order.
    pub fn incident(&self, idx: usize) -> impl Iterator<Item = &Edge> + '_ {
        self.incident[idx].iter().map(move |&e| &self.edges[e])
    }

    /// Edges of `kind` ending at `id`.
    pub fn edges_into<'a>(&'a self, id: &str, kind: EdgeType) -> Vec<&'a Edge> {
        match self.index.get(id) {
            Some(&idx) => self
                .incident(idx)
                .filter(|e| e.dst == idx && e.kind == kind)
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn label(&self, id: &str) -> Option<Label> {
        self.index.get(id).and_then(|i| self.labels.get(i).copied())
    }

    /// Labeled news in node-insertion order.
    pub fn labeled_news(&self) -> Vec<(String, Label)> {
        self.labels
            .iter()
            .map(|(&i, &l)| (self.ids[i].clone(), l))
            .collect()
    }

    pub fn node_types_present(&self) -> BTreeSet<NodeType> {
        self.types.iter().copied().collect()
    }

    pub fn edge_types_present(&self) -> BTreeSet<EdgeType> {
        self.edges.iter().map(|e| e.kind).collect()
    }

    /// `|node types| + |edge types| > 2`, or empty.
    pub fn is_heterogeneous(&self) -> bool {
        self.ids.is_empty() || self.node_types_present().len() + self.edge_types_present().len() > 2
    }

    /// Re-checks every edge against its relation signature and timestamp rule.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            let (s, d) = e.kind.signature();
            if self.types[e.src] != s || self.types[e.dst] != d {
                out.push(format!("edge {i}: {} signature violated", e.kind));
            }
            if e.kind.requires_timestamp() != e.timestamp.is_some() {
                out.push(format!("edge {i}: {} timestamp rule violated", e.kind));
            }
        }
        for &i in self.labels.keys() {
            if self.types[i] != NodeType::News {
                out.push(format!("label on non-news node {}", self.ids[i]));
            }
        }
        out
    }
}

/// Keeps nodes whose type is in `types` and edges with both endpoints kept.
pub fn project_subgraph(g: &HeteroGraph, types: &BTreeSet<NodeType>) -> Result<HeteroGraph> {
    if types.is_empty() {
        return Err(Error::Precondition("projection needs at least one node type".into()));
    }
    let mut out = HeteroGraph::new();
    let mut remap = vec![usize::MAX; g.node_count()];
    for (i, (id, t)) in g.nodes().enumerate() {
        if types.contains(&t) {
            remap[i] = out.add_node(id, t)?;
        }
    }
    for e in g.edges() {
        let (s, d) = (remap[e.src], remap[e.dst]);
        if s != usize::MAX && d != usize::MAX {
            let idx = out.edges.len();
            out.edges.push(Edge { src: s, dst: d, ..*e });
            out.incident[s].push(idx);
            if d != s {
                out.incident[d].push(idx);
            }
        }
    }
    for (&i, &l) in &g.labels {
        if remap[i] != usize::MAX {
            out.labels.insert(remap[i], l);
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    kind: String,
    id: String,
    #[serde(rename = "type")]
    node_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<u8>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    kind: String,
    src: String,
    dst: String,
    #[serde(rename = "type")]
    edge_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ts: Option<i64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    bidirectional: bool,
}

fn apply_record(g: &mut HeteroGraph, line: &str) -> Result<()> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| Error::Schema(e.to_string()))?;
    let kind = value
        .get("kind")
        .and_then(|k| k.as_str())
        .ok_or_else(|| Error::Schema("record lacks a string `kind`".into()))?
        .to_string();
    match kind.as_str() {
        "node" => {
            let rec: NodeRecord =
                serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
            let t: NodeType = rec.node_type.parse()?;
            g.add_node(&rec.id, t)?;
            if let Some(code) = rec.label {
                g.set_label(&rec.id, Label::from_code(code)?)?;
            }
        }
        "edge" => {
            let rec: EdgeRecord =
                serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
            let t: EdgeType = rec.edge_type.parse()?;
            if rec.bidirectional {
                if rec.ts.is_some() {
                    return Err(Error::Schema("bidirectional edges carry no timestamp".into()));
                }
                g.add_bidirectional(&rec.src, &rec.dst, t)?;
            } else {
                g.add_edge(&rec.src, &rec.dst, t, rec.ts)?;
            }
        }
        other => return Err(Error::Schema(format!("unknown record kind `{other}`"))),
    }
    Ok(())
}

/// Parses the JSON-lines graph format; `path` is used for error messages.
pub fn read_graph(reader: impl BufRead, path: &Path) -> Result<HeteroGraph> {
    let mut g = HeteroGraph::new();
    let mut last = 0;
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        last = line_no;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        apply_record(&mut g, &line).map_err(|e| Error::Ingestion {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
    }
    if !g.is_heterogeneous() {
        return Err(Error::Ingestion {
            path: path.to_path_buf(),
            line: last,
            message: "graph needs more than two node and edge types combined".into(),
        });
    }
    Ok(g)
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<HeteroGraph> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_graph(BufReader::new(file), path)
}

pub fn write_graph(g: &HeteroGraph, mut w: impl Write) -> std::io::Result<()> {
    for (i, (id, t)) in g.nodes().enumerate() {
        let rec = NodeRecord {
            kind: "node".into(),
            id: id.to_string(),
            node_type: t.as_str().into(),
            label: g.labels.get(&i).map(|l| l.code()),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    for e in g.edges() {
        let rec = EdgeRecord {
            kind: "edge".into(),
            src: g.id(e.src).to_string(),
            dst: g.id(e.dst).to_string(),
            edge_type: e.kind.as_str().into(),
            ts: e.timestamp,
            bidirectional: false,
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn save_graph(g: &HeteroGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_graph(g, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}
