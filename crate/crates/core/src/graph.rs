//! Dataflow graph model: nodes are primitive operations, edges carry 16-bit
//! words from a source output port to a destination input port.
//!
//! Input ports that no edge drives are external inputs of the graph. This is
//! how mined patterns and PE datapaths expose their operands.

use crate::op::{OpKind, MEM_PORTS};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub op: OpKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<u16>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: String,
    #[serde(default)]
    pub src_port: usize,
    pub dst: String,
    pub dst_port: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("duplicate node id `{0}`")]
    DuplicateId(String),
    #[error("edge references missing node `{0}`")]
    DanglingEdge(String),
    #[error("port {port} out of range for node `{node}` ({op})")]
    BadPort { node: String, port: usize, op: OpKind },
    #[error("input port {port} of node `{node}` has more than one driver")]
    MultipleDrivers { node: String, port: usize },
    #[error("node `{0}` ({1}) cannot drive other nodes")]
    NoOutput(String, OpKind),
    #[error("value given for node `{0}` whose op carries no value")]
    UnexpectedValue(String),
    #[error("graph contains a cycle through `{0}`")]
    Cycle(String),
}

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("malformed graph document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid graph: {0}")]
    Validation(#[from] ValidationError),
    #[error("graph is not connected")]
    Disconnected,
}

/// Key naming an undriven input port, used for external inputs.
pub fn port_key(node: &str, port: usize) -> String {
    format!("{node}.{port}")
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    #[serde(default)]
    nodes: Vec<Node>,
    #[serde(default)]
    edges: Vec<Edge>,
}

/// A validated, immutable dataflow graph.
#[derive(Debug, Clone)]
pub struct DataflowGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    index: HashMap<String, usize>,
    // per node: edge indices, in-edges sorted by dst_port
    ins: Vec<Vec<usize>>,
    outs: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl PartialEq for DataflowGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

impl Eq for DataflowGraph {}

impl Serialize for DataflowGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawGraph {
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DataflowGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawGraph::deserialize(d)?;
        DataflowGraph::new(raw.nodes, raw.edges).map_err(serde::de::Error::custom)
    }
}

impl Default for DataflowGraph {
    fn default() -> Self {
        DataflowGraph::new(Vec::new(), Vec::new()).expect("empty graph is valid")
    }
}

/// Parse and validate a graph document.
pub fn parse_graph(text: &str) -> Result<DataflowGraph, GraphError> {
    let raw: RawGraph = serde_json::from_str(text)?;
    Ok(DataflowGraph::new(raw.nodes, raw.edges)?)
}

pub fn serialize_graph(g: &DataflowGraph) -> String {
    serde_json::to_string_pretty(g).expect("graph serialization is infallible")
}

impl DataflowGraph {
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, ValidationError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id.clone(), i).is_some() {
                return Err(ValidationError::DuplicateId(n.id.clone()));
            }
            if n.value.is_some() && !n.op.has_value() {
                return Err(ValidationError::UnexpectedValue(n.id.clone()));
            }
        }
        let mut ins = vec![Vec::new(); nodes.len()];
        let mut outs = vec![Vec::new(); nodes.len()];
        let mut driven: HashMap<(usize, usize), usize> = HashMap::new();
        for (ei, e) in edges.iter().enumerate() {
            let s = *index
                .get(&e.src)
                .ok_or_else(|| ValidationError::DanglingEdge(e.src.clone()))?;
            let d = *index
                .get(&e.dst)
                .ok_or_else(|| ValidationError::DanglingEdge(e.dst.clone()))?;
            let src_op = nodes[s].op;
            if src_op == OpKind::Output {
                return Err(ValidationError::NoOutput(e.src.clone(), src_op));
            }
            let max_src_port = if src_op == OpKind::Mem { MEM_PORTS } else { 1 };
            if e.src_port >= max_src_port {
                return Err(ValidationError::BadPort {
                    node: e.src.clone(),
                    port: e.src_port,
                    op: src_op,
                });
            }
            let dst_op = nodes[d].op;
            if e.dst_port >= dst_op.arity() {
                return Err(ValidationError::BadPort {
                    node: e.dst.clone(),
                    port: e.dst_port,
                    op: dst_op,
                });
            }
            if driven.insert((d, e.dst_port), ei).is_some() {
                return Err(ValidationError::MultipleDrivers {
                    node: e.dst.clone(),
                    port: e.dst_port,
                });
            }
            outs[s].push(ei);
            ins[d].push(ei);
        }
        for list in &mut ins {
            list.sort_by_key(|&ei| edges[ei].dst_port);
        }
        let topo = topo_sort(&nodes, &edges, &index, &outs)?;
        Ok(DataflowGraph {
            nodes,
            edges,
            index,
            ins,
            outs,
            topo,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.index_of(id).map(|i| &self.nodes[i])
    }

    pub fn op(&self, i: usize) -> OpKind {
        self.nodes[i].op
    }

    /// Edge indices entering node `i`, ordered by destination port.
    pub fn in_edges(&self, i: usize) -> &[usize] {
        &self.ins[i]
    }

    pub fn out_edges(&self, i: usize) -> &[usize] {
        &self.outs[i]
    }

    pub fn src_index(&self, ei: usize) -> usize {
        self.index[&self.edges[ei].src]
    }

    pub fn dst_index(&self, ei: usize) -> usize {
        self.index[&self.edges[ei].dst]
    }

    /// The edge driving input `port` of node `i`, if any.
    pub fn driver(&self, i: usize, port: usize) -> Option<usize> {
        self.ins[i]
            .iter()
            .copied()
            .find(|&ei| self.edges[ei].dst_port == port)
    }

    /// Node indices in a topological order (sources first).
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    /// Distinct neighbours of `i` ignoring edge direction.
    pub fn neighbors(&self, i: usize) -> BTreeSet<usize> {
        let mut set = BTreeSet::new();
        for &ei in &self.ins[i] {
            set.insert(self.src_index(ei));
        }
        for &ei in &self.outs[i] {
            set.insert(self.dst_index(ei));
        }
        set.remove(&i);
        set
    }

    /// Undriven input ports `(node index, port)` in node order.
    pub fn undriven_ports(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let arity = if n.op == OpKind::Mem { 1 } else { n.op.arity() };
            for p in 0..arity {
                if self.driver(i, p).is_none() {
                    out.push((i, p));
                }
            }
        }
        out
    }

    /// Nodes that feed no other node, excluding `output` nodes.
    pub fn sinks(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.outs[i].is_empty() && self.nodes[i].op != OpKind::Output)
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        self.is_connected_subset(&(0..self.len()).collect::<Vec<_>>())
    }

    /// Whether `subset` (node indices) is non-empty and connected ignoring direction.
    pub fn is_connected_subset(&self, subset: &[usize]) -> bool {
        let Some(&start) = subset.first() else {
            return false;
        };
        let members: BTreeSet<usize> = subset.iter().copied().collect();
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for w in self.neighbors(v) {
                if members.contains(&w) && seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen.len() == members.len()
    }

    /// The subgraph induced by `subset`, keeping node order of `subset`.
    pub fn induced_subgraph(&self, subset: &[usize]) -> DataflowGraph {
        let members: BTreeSet<usize> = subset.iter().copied().collect();
        let nodes = subset.iter().map(|&i| self.nodes[i].clone()).collect();
        let edges = self
            .edges
            .iter()
            .enumerate()
            .filter(|(ei, _)| {
                members.contains(&self.src_index(*ei)) && members.contains(&self.dst_index(*ei))
            })
            .map(|(_, e)| e.clone())
            .collect();
        DataflowGraph::new(nodes, edges).expect("induced subgraph of a valid graph is valid")
    }

    /// Set of operations used by nodes of this graph.
    pub fn ops(&self) -> BTreeSet<OpKind> {
        self.nodes.iter().map(|n| n.op).collect()
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph G {\n");
        for n in &self.nodes {
            let label = match n.value {
                Some(v) => format!("{} {}", n.op, v),
                None => n.op.to_string(),
            };
            let _ = writeln!(s, "  \"{}\" [label=\"{}\"];", n.id, label);
        }
        for e in &self.edges {
            let _ = writeln!(
                s,
                "  \"{}\" -> \"{}\" [label=\"{}\"];",
                e.src, e.dst, e.dst_port
            );
        }
        s.push_str("}\n");
        s
    }
}

fn topo_sort(
    nodes: &[Node],
    edges: &[Edge],
    index: &HashMap<String, usize>,
    outs: &[Vec<usize>],
) -> Result<Vec<usize>, ValidationError> {
    let mut indeg = vec![0usize; nodes.len()];
    for e in edges {
        indeg[index[&e.dst]] += 1;
    }
    let mut queue: VecDeque<usize> = (0..nodes.len()).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &ei in &outs[v] {
            let d = index[&edges[ei].dst];
            indeg[d] -= 1;
            if indeg[d] == 0 {
                queue.push_back(d);
            }
        }
    }
    if order.len() != nodes.len() {
        let stuck = (0..nodes.len()).find(|&i| indeg[i] > 0).unwrap_or(0);
        return Err(ValidationError::Cycle(nodes[stuck].id.clone()));
    }
    Ok(order)
}

/// Incremental, single-owner construction of a [`DataflowGraph`].
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(&mut self, id: impl Into<String>, op: OpKind) -> &mut Self {
        self.nodes.push(Node {
            id: id.into(),
            op,
            value: None,
        });
        self
    }

    pub fn constant(&mut self, id: impl Into<String>, value: u16) -> &mut Self {
        self.nodes.push(Node {
            id: id.into(),
            op: OpKind::Const,
            value: Some(value),
        });
        self
    }

    pub fn lut(&mut self, id: impl Into<String>, table: u8) -> &mut Self {
        self.nodes.push(Node {
            id: id.into(),
            op: OpKind::Lut,
            value: Some(table as u16),
        });
        self
    }

    pub fn edge(&mut self, src: impl Into<String>, dst: impl Into<String>, dst_port: usize) -> &mut Self {
        self.edges.push(Edge {
            src: src.into(),
            src_port: 0,
            dst: dst.into(),
            dst_port,
        });
        self
    }

    pub fn build(&self) -> Result<DataflowGraph, ValidationError> {
        DataflowGraph::new(self.nodes.clone(), self.edges.clone())
    }
}
