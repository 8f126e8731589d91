//! Reference interpreter for dataflow graphs.
//!
//! Combinational, single-cycle semantics with 16-bit wraparound. External
//! inputs are keyed by `input` node id or, for undriven ports, by
//! [`port_key`](crate::graph::port_key).

use crate::graph::{port_key, DataflowGraph};
use crate::op::OpKind;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub type InputVector = BTreeMap<String, u16>;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimResult {
    pub outputs: BTreeMap<String, u16>,
    /// Evaluations per operation, excluding constants, muxes, I/O and memory.
    pub op_event_count: BTreeMap<OpKind, u64>,
    /// Evaluations per datapath unit id (datapath and netlist simulation only).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub unit_events: BTreeMap<String, u64>,
    /// Number of active mux selections (datapath and netlist simulation only).
    #[serde(default)]
    pub mux_events: u64,
}

impl SimResult {
    pub fn total_ops(&self) -> u64 {
        self.op_event_count.values().sum()
    }

    pub(crate) fn count_op(&mut self, op: OpKind) {
        if op.is_compute() {
            *self.op_event_count.entry(op).or_default() += 1;
        }
    }

    pub(crate) fn absorb(&mut self, other: &SimResult) {
        for (op, n) in &other.op_event_count {
            *self.op_event_count.entry(*op).or_default() += n;
        }
        for (u, n) in &other.unit_events {
            *self.unit_events.entry(u.clone()).or_default() += n;
        }
        self.mux_events += other.mux_events;
    }
}

/// Input vectors and the matching simulation results.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimTraces {
    pub vectors: Vec<InputVector>,
    pub traces: Vec<SimResult>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("missing input `{0}`")]
    MissingInput(String),
    #[error("unknown configuration `{0}`")]
    UnknownConfig(String),
    #[error("configuration `{config}` is inconsistent: {reason}")]
    BadConfig { config: String, reason: String },
}

/// External input keys a graph needs, in node order.
pub fn required_inputs(g: &DataflowGraph) -> Vec<String> {
    let mut keys = Vec::new();
    for (i, n) in g.nodes().iter().enumerate() {
        match n.op {
            OpKind::Input => keys.push(n.id.clone()),
            OpKind::Const => {}
            op => {
                let arity = if op == OpKind::Mem { 1 } else { op.arity() };
                for p in 0..arity {
                    if g.driver(i, p).is_none() {
                        keys.push(port_key(&n.id, p));
                    }
                }
            }
        }
    }
    keys
}

pub fn random_inputs<R: Rng + ?Sized>(keys: &[String], rng: &mut R) -> InputVector {
    keys.iter().map(|k| (k.clone(), rng.gen())).collect()
}

/// Value of every node, indexed like `g.nodes()`.
pub fn evaluate(g: &DataflowGraph, x: &InputVector) -> Result<(Vec<u16>, SimResult), SimError> {
    let mut values = vec![0u16; g.len()];
    let mut result = SimResult::default();
    let fetch = |key: String| x.get(&key).copied().ok_or(SimError::MissingInput(key));
    for &v in g.topo_order() {
        let node = &g.nodes()[v];
        values[v] = match node.op {
            OpKind::Input => fetch(node.id.clone())?,
            OpKind::Const => node.value.unwrap_or(0),
            op => {
                let arity = if op == OpKind::Mem { 1 } else { op.arity() };
                let mut args = [0u16; 3];
                for (p, slot) in args.iter_mut().enumerate().take(arity) {
                    *slot = match g.driver(v, p) {
                        Some(ei) => values[g.src_index(ei)],
                        None => fetch(port_key(&node.id, p))?,
                    };
                }
                result.count_op(op);
                op.eval(&args[..arity], node.value.unwrap_or(0))
            }
        };
    }
    for (i, n) in g.nodes().iter().enumerate() {
        if n.op == OpKind::Output || g.out_edges(i).is_empty() {
            result.outputs.insert(n.id.clone(), values[i]);
        }
    }
    Ok((values, result))
}

/// Simulate a graph; outputs are `output` nodes and all other sinks.
pub fn simulate(g: &DataflowGraph, x: &InputVector) -> Result<SimResult, SimError> {
    evaluate(g, x).map(|(_, r)| r)
}
