//! Graph data model and the JSON interchange document.
//!
//! Documents look like
//!
//! ```json
//! {"directed": false,
//!  "nodes": [{"id": "a", "label": "@alice", "cluster": 0, "pos": [0.0, 1.0, 2.0], "attrs": {"location": "NYC"}}],
//!  "edges": [["a", "b"]]}
//! ```
//!
//! Node ids are strings in the document and dense [`VertexId`]s in memory, assigned in
//! document order. Ingestion drops self-loops and merges repeated unordered pairs so that
//! every [`Graph`] is simple; the [`IngestReport`] says how much was discarded.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::community::Partition;
use crate::geom::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId(pub u32);

impl VertexId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for VertexId {
    fn from(i: usize) -> Self {
        VertexId(i as u32)
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("malformed document at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("edge #{edge_index} ({a}, {b}) references unknown vertex `{missing}`")]
    UnknownVertex {
        edge_index: usize,
        a: String,
        b: String,
        missing: String,
    },
    #[error("vertex id `{0}` declared more than once")]
    DuplicateVertex(String),
    #[error("vertex `{0}` has an empty label")]
    EmptyLabel(String),
    #[error("vertex `{id}` has a non-finite position")]
    NonFinitePosition { id: String },
    #[error("{what}: expected {expected} entries, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("edge endpoint {0} out of range")]
    EndpointOutOfRange(usize),
}

/// Scalar metadata value attached to a vertex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VertexMeta {
    /// Display text, e.g. a social-network handle.
    pub label: Option<String>,
    pub attributes: BTreeMap<String, AttrValue>,
    pub cluster: Option<u32>,
    pub position: Option<Vec3>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub self_loops_dropped: usize,
    pub duplicates_merged: usize,
}

/// Immutable simple graph. Edges are stored once per unordered pair, in first-seen order.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    directed: bool,
    ids: Vec<String>,
    meta: Vec<VertexMeta>,
    edges: Vec<(VertexId, VertexId)>,
    adj_offsets: Vec<usize>,
    adj: Vec<VertexId>,
    index: HashMap<String, VertexId>,
}

impl Graph {
    pub fn empty() -> Self {
        GraphBuilder::new().build().0
    }

    /// Builds a graph on vertices `0..n` named by their decimal index.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<(Graph, IngestReport), GraphError> {
        let mut b = GraphBuilder::with_capacity(n);
        for i in 0..n {
            b.add_vertex(i.to_string(), VertexMeta::default())?;
        }
        for (a, c) in edges {
            if a >= n {
                return Err(GraphError::EndpointOutOfRange(a));
            }
            if c >= n {
                return Err(GraphError::EndpointOutOfRange(c));
            }
            b.add_edge(VertexId::from(a), VertexId::from(c));
        }
        Ok(b.build())
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn vertex_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.ids.len()).map(VertexId::from)
    }

    pub fn edges(&self) -> &[(VertexId, VertexId)] {
        &self.edges
    }

    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        let i = v.index();
        &self.adj[self.adj_offsets[i]..self.adj_offsets[i + 1]]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        let i = v.index();
        self.adj_offsets[i + 1] - self.adj_offsets[i]
    }

    pub fn id(&self, v: VertexId) -> &str {
        &self.ids[v.index()]
    }

    pub fn meta(&self, v: VertexId) -> &VertexMeta {
        &self.meta[v.index()]
    }

    pub fn lookup(&self, id: &str) -> Option<VertexId> {
        self.index.get(id).copied()
    }

    /// Subgraph induced by `keep`, in the order given. Metadata and string ids carry over.
    pub fn induced_subgraph(&self, keep: &[VertexId]) -> Graph {
        let mut remap = vec![u32::MAX; self.vertex_count()];
        let mut b = GraphBuilder::with_capacity(keep.len());
        b.directed(self.directed);
        for &v in keep {
            if remap[v.index()] != u32::MAX {
                continue;
            }
            let nv = b
                .add_vertex(self.id(v).to_string(), self.meta(v).clone())
                .expect("ids unique in source graph");
            remap[v.index()] = nv.0;
        }
        for &(a, c) in &self.edges {
            let (ra, rc) = (remap[a.index()], remap[c.index()]);
            if ra != u32::MAX && rc != u32::MAX {
                b.add_edge(VertexId(ra), VertexId(rc));
            }
        }
        b.build().0
    }

    /// Subgraph on the given edges and exactly their endpoints (no isolated vertices).
    /// Vertex order follows the source graph.
    pub fn edge_subgraph(&self, edges: &[(VertexId, VertexId)]) -> Graph {
        let mut used = vec![false; self.vertex_count()];
        for &(a, c) in edges {
            used[a.index()] = true;
            used[c.index()] = true;
        }
        let mut remap = vec![u32::MAX; self.vertex_count()];
        let mut b = GraphBuilder::new();
        b.directed(self.directed);
        for v in self.vertices().filter(|v| used[v.index()]) {
            let nv = b
                .add_vertex(self.id(v).to_string(), self.meta(v).clone())
                .expect("ids unique in source graph");
            remap[v.index()] = nv.0;
        }
        for &(a, c) in edges {
            b.add_edge(VertexId(remap[a.index()]), VertexId(remap[c.index()]));
        }
        b.build().0
    }

    /// Copy of this graph whose vertices carry the given positions and clusters.
    pub fn annotated(&self, positions: &[Vec3], partition: &Partition) -> Result<Graph, GraphError> {
        let n = self.vertex_count();
        if positions.len() != n {
            return Err(GraphError::LengthMismatch {
                what: "layout positions",
                expected: n,
                got: positions.len(),
            });
        }
        if partition.len() != n {
            return Err(GraphError::LengthMismatch {
                what: "cluster assignment",
                expected: n,
                got: partition.len(),
            });
        }
        let mut g = self.clone();
        for (i, m) in g.meta.iter_mut().enumerate() {
            if !positions[i].is_finite() {
                return Err(GraphError::NonFinitePosition {
                    id: self.ids[i].clone(),
                });
            }
            m.position = Some(positions[i]);
            m.cluster = Some(partition.community_of(VertexId::from(i)));
        }
        Ok(g)
    }

    /// Positions of all vertices, if every vertex has one.
    pub fn positions(&self) -> Option<Vec<Vec3>> {
        self.meta.iter().map(|m| m.position).collect()
    }
}

/// Accumulates vertices and edges, enforcing the simple-graph invariants on `build`.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    directed: bool,
    ids: Vec<String>,
    meta: Vec<VertexMeta>,
    index: HashMap<String, VertexId>,
    raw_edges: Vec<(VertexId, VertexId)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        GraphBuilder {
            ids: Vec::with_capacity(n),
            meta: Vec::with_capacity(n),
            index: HashMap::with_capacity(n),
            ..Default::default()
        }
    }

    pub fn directed(&mut self, directed: bool) -> &mut Self {
        self.directed = directed;
        self
    }

    pub fn add_vertex(&mut self, id: String, meta: VertexMeta) -> Result<VertexId, GraphError> {
        if matches!(&meta.label, Some(l) if l.is_empty()) {
            return Err(GraphError::EmptyLabel(id));
        }
        if matches!(meta.position, Some(p) if !p.is_finite()) {
            return Err(GraphError::NonFinitePosition { id });
        }
        if self.index.contains_key(&id) {
            return Err(GraphError::DuplicateVertex(id));
        }
        let v = VertexId::from(self.ids.len());
        self.index.insert(id.clone(), v);
        self.ids.push(id);
        self.meta.push(meta);
        Ok(v)
    }

    pub fn lookup(&self, id: &str) -> Option<VertexId> {
        self.index.get(id).copied()
    }

    pub fn add_edge(&mut self, a: VertexId, b: VertexId) -> &mut Self {
        self.raw_edges.push((a, b));
        self
    }

    pub fn build(self) -> (Graph, IngestReport) {
        let n = self.ids.len();
        let mut report = IngestReport::default();
        let mut seen = HashSet::with_capacity(self.raw_edges.len());
        let mut edges = Vec::with_capacity(self.raw_edges.len());
        for (a, b) in self.raw_edges {
            if a == b {
                report.self_loops_dropped += 1;
                continue;
            }
            let key = (a.min(b), a.max(b));
            if !seen.insert(key) {
                report.duplicates_merged += 1;
                continue;
            }
            edges.push((a, b));
        }

        let mut deg = vec![0usize; n];
        for &(a, b) in &edges {
            deg[a.index()] += 1;
            deg[b.index()] += 1;
        }
        let mut adj_offsets = Vec::with_capacity(n + 1);
        adj_offsets.push(0);
        for d in &deg {
            adj_offsets.push(adj_offsets.last().unwrap() + d);
        }
        let mut fill = adj_offsets.clone();
        let mut adj = vec![VertexId(0); *adj_offsets.last().unwrap()];
        for &(a, b) in &edges {
            adj[fill[a.index()]] = b;
            fill[a.index()] += 1;
            adj[fill[b.index()]] = a;
            fill[b.index()] += 1;
        }
        for i in 0..n {
            adj[adj_offsets[i]..adj_offsets[i + 1]].sort_unstable();
        }

        let g = Graph {
            directed: self.directed,
            ids: self.ids,
            meta: self.meta,
            edges,
            adj_offsets,
            adj,
            index: self.index,
        };
        (g, report)
    }
}

/// Number of vertices per undirected degree.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DegreeHistogram {
    pub counts: BTreeMap<usize, usize>,
    pub n: usize,
}

impl DegreeHistogram {
    pub fn from_degrees(degrees: impl IntoIterator<Item = usize>) -> Self {
        let mut h = DegreeHistogram::default();
        for d in degrees {
            *h.counts.entry(d).or_insert(0) += 1;
            h.n += 1;
        }
        h
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let s: usize = self.counts.iter().map(|(d, c)| d * c).sum();
        s as f64 / self.n as f64
    }
}

pub fn degree_distribution(g: &Graph) -> DegreeHistogram {
    DegreeHistogram::from_degrees(g.vertices().map(|v| g.degree(v)))
}

// ---------------------------------------------------------------------------
// Interchange document

#[derive(Debug, Deserialize, Serialize)]
struct Document {
    #[serde(default)]
    directed: bool,
    nodes: Vec<NodeDoc>,
    #[serde(default)]
    edges: Vec<[NodeRef; 2]>,
}

#[derive(Debug, Deserialize, Serialize)]
struct NodeDoc {
    id: NodeRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cluster: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pos: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    attrs: BTreeMap<String, AttrValue>,
}

/// Ids are strings; bare integers are accepted on input and treated as their decimal form.
#[derive(Debug, Deserialize, Serialize)]
#[serde(untagged)]
enum NodeRef {
    Str(String),
    Int(i64),
}

impl NodeRef {
    fn into_string(self) -> String {
        match self {
            NodeRef::Str(s) => s,
            NodeRef::Int(i) => i.to_string(),
        }
    }

    fn as_string(&self) -> String {
        match self {
            NodeRef::Str(s) => s.clone(),
            NodeRef::Int(i) => i.to_string(),
        }
    }
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut off = 0;
    let mut cur = 1;
    while cur < line && off < bytes.len() {
        if bytes[off] == b'\n' {
            cur += 1;
        }
        off += 1;
    }
    (off + column.saturating_sub(1)).min(bytes.len())
}

/// Parses an interchange document.
pub fn load_graph(bytes: &[u8]) -> Result<(Graph, IngestReport), GraphError> {
    let doc: Document = serde_json::from_slice(bytes).map_err(|e| GraphError::Parse {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;

    let mut b = GraphBuilder::with_capacity(doc.nodes.len());
    b.directed(doc.directed);
    for node in doc.nodes {
        let meta = VertexMeta {
            label: node.label,
            attributes: node.attrs,
            cluster: node.cluster,
            position: node.pos.map(Vec3::from),
        };
        b.add_vertex(node.id.into_string(), meta)?;
    }
    for (i, [a, c]) in doc.edges.into_iter().enumerate() {
        let (sa, sc) = (a.as_string(), c.as_string());
        let va = b.lookup(&sa);
        let vc = b.lookup(&sc);
        match (va, vc) {
            (Some(va), Some(vc)) => {
                b.add_edge(va, vc);
            }
            _ => {
                let missing = if va.is_none() { sa.clone() } else { sc.clone() };
                return Err(GraphError::UnknownVertex {
                    edge_index: i,
                    a: sa,
                    b: sc,
                    missing,
                });
            }
        }
    }
    Ok(b.build())
}

/// Serializes whatever metadata the graph currently carries.
pub fn to_document(g: &Graph) -> Vec<u8> {
    let doc = Document {
        directed: g.directed,
        nodes: g
            .vertices()
            .map(|v| {
                let m = g.meta(v);
                NodeDoc {
                    id: NodeRef::Str(g.id(v).to_string()),
                    label: m.label.clone(),
                    cluster: m.cluster,
                    pos: m.position.map(Vec3::to_array),
                    attrs: m.attributes.clone(),
                }
            })
            .collect(),
        edges: g
            .edges()
            .iter()
            .map(|&(a, b)| [NodeRef::Str(g.id(a).to_string()), NodeRef::Str(g.id(b).to_string())])
            .collect(),
    };
    serde_json::to_vec(&doc).expect("document serialization is infallible")
}

/// Document in which every vertex carries a position and a cluster index.
pub fn serialize_annotated(
    g: &Graph,
    positions: &[Vec3],
    partition: &Partition,
) -> Result<Vec<u8>, GraphError> {
    Ok(to_document(&g.annotated(positions, partition)?))
}
