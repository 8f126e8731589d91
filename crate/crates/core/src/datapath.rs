//! Configurable datapaths produced by merging.
//!
//! A datapath holds functional units (each able to perform a set of ops) and
//! muxes. Every configuration records the source graph it realises, where
//! each source node lives, which unit port each source port landed on, the op
//! selected per active unit and the mux legs selected. Muxes are derived from
//! the configurations: a unit input port that receives more than one distinct
//! source across configurations (an external operand counts as a source) gets
//! a mux with one leg per source.

use crate::graph::{port_key, DataflowGraph};
use crate::op::OpKind;
use crate::sim::{self, InputVector, SimError, SimResult};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NodeKind {
    Unit { ops: BTreeSet<OpKind> },
    Mux { legs: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatapathNode {
    pub id: String,
    #[serde(flatten)]
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DatapathEdge {
    pub src: String,
    pub dst: String,
    pub dst_port: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration {
    pub name: String,
    pub source: DataflowGraph,
    /// source node id -> unit id
    pub node_map: BTreeMap<String, String>,
    /// source node id -> unit port for each source input port
    pub port_map: BTreeMap<String, Vec<usize>>,
    pub op_selects: BTreeMap<String, OpKind>,
    pub mux_settings: BTreeMap<String, usize>,
    /// const register / LUT table values per unit
    #[serde(default)]
    pub values: BTreeMap<String, u16>,
}

impl Configuration {
    /// Identity configuration of `g` placed on units named like its nodes.
    pub fn identity(name: impl Into<String>, g: &DataflowGraph) -> Self {
        Configuration {
            name: name.into(),
            source: g.clone(),
            node_map: g.nodes().iter().map(|n| (n.id.clone(), n.id.clone())).collect(),
            port_map: g
                .nodes()
                .iter()
                .map(|n| (n.id.clone(), (0..n.op.arity()).collect()))
                .collect(),
            op_selects: g.nodes().iter().map(|n| (n.id.clone(), n.op)).collect(),
            mux_settings: BTreeMap::new(),
            values: g
                .nodes()
                .iter()
                .filter(|n| n.op.has_value())
                .map(|n| (n.id.clone(), n.value.unwrap_or(0)))
                .collect(),
        }
    }

    /// Source of every used unit input port: `Some(unit)` or `None` for an
    /// external operand.
    pub fn port_sources(&self) -> BTreeMap<(String, usize), Option<String>> {
        let g = &self.source;
        let mut out = BTreeMap::new();
        for (i, n) in g.nodes().iter().enumerate() {
            let unit = &self.node_map[&n.id];
            for p in 0..n.op.arity() {
                let src = g
                    .driver(i, p)
                    .map(|ei| self.node_map[&g.edges()[ei].src].clone());
                out.insert((unit.clone(), self.port_map[&n.id][p]), src);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatapathError {
    #[error("node `{0}` ({1}) cannot be part of a datapath")]
    NotADatapath(String, OpKind),
    #[error("duplicate configuration name `{0}`")]
    DuplicateConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedDatapath {
    pub nodes: Vec<DatapathNode>,
    pub edges: Vec<DatapathEdge>,
    pub configurations: Vec<Configuration>,
}

pub fn check_datapath_graph(g: &DataflowGraph) -> Result<(), DatapathError> {
    match g.nodes().iter().find(|n| !n.op.is_datapath()) {
        Some(n) => Err(DatapathError::NotADatapath(n.id.clone(), n.op)),
        None => Ok(()),
    }
}

impl MergedDatapath {
    /// A single graph as a datapath with one configuration.
    pub fn from_graph(name: impl Into<String>, g: &DataflowGraph) -> Result<Self, DatapathError> {
        check_datapath_graph(g)?;
        let units = g
            .nodes()
            .iter()
            .map(|n| (n.id.clone(), BTreeSet::from([n.op])))
            .collect();
        Ok(Self::assemble(units, vec![Configuration::identity(name, g)]))
    }

    /// A single multi-op unit with one configuration per op, named `base.<op>`.
    pub fn single_unit(id: &str, ops: &BTreeSet<OpKind>) -> Self {
        let configs = ops
            .iter()
            .map(|&op| {
                let mut b = crate::graph::GraphBuilder::new();
                b.node(id, op);
                let g = b.build().expect("single node graph");
                Configuration::identity(format!("base.{op}"), &g)
            })
            .collect();
        Self::assemble(vec![(id.to_string(), ops.clone())], configs)
    }

    /// Build nodes, edges and mux settings from units and configurations
    /// whose `mux_settings` are ignored.
    pub fn assemble(units: Vec<(String, BTreeSet<OpKind>)>, mut configs: Vec<Configuration>) -> Self {
        let unit_index: HashMap<String, usize> = units
            .iter()
            .enumerate()
            .map(|(i, (id, _))| (id.clone(), i))
            .collect();
        let arity = |ops: &BTreeSet<OpKind>| ops.iter().map(|o| o.arity()).max().unwrap_or(0);
        let per_config: Vec<BTreeMap<(String, usize), Option<String>>> =
            configs.iter().map(Configuration::port_sources).collect();
        // sources per (unit index, port); None (external) sorts first
        let mut sources: BTreeMap<(usize, usize), BTreeSet<Option<usize>>> = BTreeMap::new();
        for ps in &per_config {
            for ((unit, port), src) in ps {
                sources
                    .entry((unit_index[unit], *port))
                    .or_default()
                    .insert(src.as_ref().map(|s| unit_index[s]));
            }
        }
        let mut taken: BTreeSet<String> = units.iter().map(|(id, _)| id.clone()).collect();
        let mut nodes: Vec<DatapathNode> = units
            .iter()
            .map(|(id, ops)| DatapathNode {
                id: id.clone(),
                kind: NodeKind::Unit { ops: ops.clone() },
            })
            .collect();
        let mut edges = Vec::new();
        let mut mux_of: HashMap<(usize, usize), (String, Vec<Option<usize>>)> = HashMap::new();
        let mut next_mux = 0usize;
        for (&(u, port), srcs) in &sources {
            debug_assert!(port < arity(&units[u].1));
            let dst = units[u].0.clone();
            if srcs.len() == 1 {
                if let Some(Some(s)) = srcs.iter().next() {
                    edges.push(DatapathEdge {
                        src: units[*s].0.clone(),
                        dst,
                        dst_port: port,
                    });
                }
                continue;
            }
            let mux_id = loop {
                let candidate = format!("mux{next_mux}");
                next_mux += 1;
                if taken.insert(candidate.clone()) {
                    break candidate;
                }
            };
            let legs: Vec<Option<usize>> = srcs.iter().copied().collect();
            for (leg, src) in legs.iter().enumerate() {
                if let Some(s) = src {
                    edges.push(DatapathEdge {
                        src: units[*s].0.clone(),
                        dst: mux_id.clone(),
                        dst_port: leg,
                    });
                }
            }
            edges.push(DatapathEdge {
                src: mux_id.clone(),
                dst,
                dst_port: port,
            });
            nodes.push(DatapathNode {
                id: mux_id.clone(),
                kind: NodeKind::Mux { legs: legs.len() },
            });
            mux_of.insert((u, port), (mux_id, legs));
        }
        for (cfg, ps) in configs.iter_mut().zip(&per_config) {
            cfg.mux_settings.clear();
            for ((unit, port), src) in ps {
                if let Some((mux, legs)) = mux_of.get(&(unit_index[unit], *port)) {
                    let want = src.as_ref().map(|s| unit_index[s]);
                    let leg = legs.iter().position(|l| *l == want).expect("leg exists");
                    cfg.mux_settings.insert(mux.clone(), leg);
                }
            }
        }
        MergedDatapath {
            nodes,
            edges,
            configurations: configs,
        }
    }

    pub fn units(&self) -> impl Iterator<Item = (&str, &BTreeSet<OpKind>)> {
        self.nodes.iter().filter_map(|n| match &n.kind {
            NodeKind::Unit { ops } => Some((n.id.as_str(), ops)),
            NodeKind::Mux { .. } => None,
        })
    }

    pub fn muxes(&self) -> impl Iterator<Item = (&str, usize)> {
        self.nodes.iter().filter_map(|n| match n.kind {
            NodeKind::Mux { legs } => Some((n.id.as_str(), legs)),
            NodeKind::Unit { .. } => None,
        })
    }

    pub fn unit_list(&self) -> Vec<(String, BTreeSet<OpKind>)> {
        self.units().map(|(id, ops)| (id.to_string(), ops.clone())).collect()
    }

    pub fn op_set(&self) -> BTreeSet<OpKind> {
        self.units().flat_map(|(_, ops)| ops.iter().copied()).collect()
    }

    pub fn node(&self, id: &str) -> Option<&DatapathNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn configuration(&self, name: &str) -> Option<&Configuration> {
        self.configurations.iter().find(|c| c.name == name)
    }

    /// Driver of a node input port.
    pub fn driver(&self, node: &str, port: usize) -> Option<&str> {
        self.edges
            .iter()
            .find(|e| e.dst == node && e.dst_port == port)
            .map(|e| e.src.as_str())
    }

    pub fn node_arity(&self, id: &str) -> usize {
        match self.node(id).map(|n| &n.kind) {
            Some(NodeKind::Unit { ops }) => ops.iter().map(|o| o.arity()).max().unwrap_or(0),
            Some(NodeKind::Mux { legs }) => *legs,
            None => 0,
        }
    }

    /// Undriven unit and mux input ports, as input keys.
    pub fn external_inputs(&self) -> Vec<String> {
        let mut keys = Vec::new();
        for n in &self.nodes {
            for p in 0..self.node_arity(&n.id) {
                if self.driver(&n.id, p).is_none() {
                    keys.push(port_key(&n.id, p));
                }
            }
        }
        keys
    }

    /// Units that are sinks of at least one configuration, in node order.
    pub fn output_units(&self) -> Vec<String> {
        let mut set = BTreeSet::new();
        for c in &self.configurations {
            for s in c.source.sinks() {
                set.insert(c.node_map[&c.source.nodes()[s].id].clone());
            }
        }
        self.units()
            .filter(|(id, _)| set.contains(*id))
            .map(|(id, _)| id.to_string())
            .collect()
    }

    /// Map a source-graph input key to the datapath input key it is read from.
    pub fn input_binding(&self, cfg: &Configuration) -> BTreeMap<String, String> {
        self.bind_inputs(&cfg.source, &cfg.node_map, &cfg.port_map, &cfg.mux_settings)
    }

    pub fn bind_inputs(
        &self,
        g: &DataflowGraph,
        node_map: &BTreeMap<String, String>,
        port_map: &BTreeMap<String, Vec<usize>>,
        mux_settings: &BTreeMap<String, usize>,
    ) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        for (i, n) in g.nodes().iter().enumerate() {
            for p in 0..n.op.arity() {
                if g.driver(i, p).is_some() {
                    continue;
                }
                let unit = &node_map[&n.id];
                let up = port_map[&n.id][p];
                let key = match self.driver(unit, up) {
                    Some(m) if mux_settings.contains_key(m) => port_key(m, mux_settings[m]),
                    _ => port_key(unit, up),
                };
                out.insert(port_key(&n.id, p), key);
            }
        }
        out
    }

    /// Evaluate the datapath under configuration `name`.
    ///
    /// `outputs` holds the value of every active unit keyed by unit id.
    pub fn simulate(&self, name: &str, x: &InputVector) -> Result<SimResult, SimError> {
        let cfg = self
            .configuration(name)
            .ok_or_else(|| SimError::UnknownConfig(name.to_string()))?;
        self.simulate_config(&cfg.name, &cfg.op_selects, &cfg.mux_settings, &cfg.values, x)
    }

    pub fn simulate_config(
        &self,
        name: &str,
        op_selects: &BTreeMap<String, OpKind>,
        mux_settings: &BTreeMap<String, usize>,
        values: &BTreeMap<String, u16>,
        x: &InputVector,
    ) -> Result<SimResult, SimError> {
        let mut ev = Evaluator {
            dp: self,
            name,
            op_selects,
            mux_settings,
            values,
            x,
            memo: HashMap::new(),
            result: SimResult::default(),
            drivers: self
                .edges
                .iter()
                .map(|e| ((e.dst.as_str(), e.dst_port), e.src.as_str()))
                .collect(),
        };
        for unit in op_selects.keys() {
            let v = ev.unit(unit, 0)?;
            ev.result.outputs.insert(unit.clone(), v);
        }
        Ok(ev.result)
    }

    /// Simulate configuration `index` and its source graph on the same
    /// operands; returns the first mismatching source node, if any.
    pub fn check_configuration(&self, index: usize, x: &InputVector) -> Result<Option<String>, SimError> {
        let cfg = &self.configurations[index];
        let (values, _) = sim::evaluate(&cfg.source, x)?;
        let binding = self.input_binding(cfg);
        let dx: InputVector = binding
            .iter()
            .map(|(src_key, dp_key)| (dp_key.clone(), x[src_key]))
            .collect();
        let r = self.simulate(&cfg.name, &dx)?;
        for (i, n) in cfg.source.nodes().iter().enumerate() {
            if r.outputs[&cfg.node_map[&n.id]] != values[i] {
                return Ok(Some(n.id.clone()));
            }
        }
        Ok(None)
    }

    /// Check every configuration against its source graph on `vectors`
    /// random operand vectors. Returns a description of each mismatch.
    pub fn verify_configurations<R: Rng + ?Sized>(&self, vectors: usize, rng: &mut R) -> Vec<String> {
        let mut failures = Vec::new();
        for (i, cfg) in self.configurations.iter().enumerate() {
            let keys = sim::required_inputs(&cfg.source);
            for _ in 0..vectors {
                let x = sim::random_inputs(&keys, rng);
                match self.check_configuration(i, &x) {
                    Ok(None) => {}
                    Ok(Some(node)) => {
                        failures.push(format!("{}: node {node} differs on {x:?}", cfg.name));
                        break;
                    }
                    Err(e) => {
                        failures.push(format!("{}: {e}", cfg.name));
                        break;
                    }
                }
            }
        }
        failures
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph PE {\n");
        for n in &self.nodes {
            match &n.kind {
                NodeKind::Unit { ops } => {
                    let label: Vec<&str> = ops.iter().map(|o| o.name()).collect();
                    let _ = writeln!(s, "  \"{}\" [label=\"{}\"];", n.id, label.join("/"));
                }
                NodeKind::Mux { .. } => {
                    let _ = writeln!(s, "  \"{}\" [label=\"MUX\", shape=trapezium];", n.id);
                }
            }
        }
        for e in &self.edges {
            let _ = writeln!(s, "  \"{}\" -> \"{}\" [label=\"{}\"];", e.src, e.dst, e.dst_port);
        }
        s.push_str("}\n");
        s
    }
}

struct Evaluator<'a> {
    dp: &'a MergedDatapath,
    name: &'a str,
    op_selects: &'a BTreeMap<String, OpKind>,
    mux_settings: &'a BTreeMap<String, usize>,
    values: &'a BTreeMap<String, u16>,
    x: &'a InputVector,
    memo: HashMap<String, u16>,
    result: SimResult,
    drivers: HashMap<(&'a str, usize), &'a str>,
}

impl Evaluator<'_> {
    fn bad(&self, reason: String) -> SimError {
        SimError::BadConfig {
            config: self.name.to_string(),
            reason,
        }
    }

    fn input(&self, node: &str, port: usize) -> Result<u16, SimError> {
        let key = port_key(node, port);
        self.x.get(&key).copied().ok_or(SimError::MissingInput(key))
    }

    fn unit(&mut self, id: &str, depth: usize) -> Result<u16, SimError> {
        if let Some(&v) = self.memo.get(id) {
            return Ok(v);
        }
        if depth > self.dp.nodes.len() {
            return Err(self.bad(format!("combinational loop through `{id}`")));
        }
        let op = *self
            .op_selects
            .get(id)
            .ok_or_else(|| self.bad(format!("unit `{id}` is read but not active")))?;
        let mut args = [0u16; 3];
        for p in 0..op.arity().min(3) {
            args[p] = self.port(id, p, depth)?;
        }
        let value = self.values.get(id).copied().unwrap_or(0);
        let v = op.eval(&args[..op.arity().min(3)], value);
        self.result.count_op(op);
        *self.result.unit_events.entry(id.to_string()).or_default() += 1;
        self.memo.insert(id.to_string(), v);
        Ok(v)
    }

    fn port(&mut self, id: &str, port: usize, depth: usize) -> Result<u16, SimError> {
        let Some(&src) = self.drivers.get(&(id, port)) else {
            return self.input(id, port);
        };
        match self.dp.node(src).map(|n| &n.kind) {
            Some(NodeKind::Mux { .. }) => {
                let leg = *self
                    .mux_settings
                    .get(src)
                    .ok_or_else(|| self.bad(format!("mux `{src}` has no setting")))?;
                self.result.mux_events += 1;
                match self.drivers.get(&(src, leg)).copied() {
                    Some(s) => self.unit(s, depth + 1),
                    None => self.input(src, leg),
                }
            }
            _ => self.unit(src, depth + 1),
        }
    }
}
