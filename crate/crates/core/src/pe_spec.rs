//! PE specifications derived from merged datapaths.
//!
//! The spec fixes the I/O ports, constant registers, output selection and the
//! list of configurations the mapper may instantiate. Each configuration
//! carries the canonical pattern it computes with node ids `p0, p1, ...`.

use crate::canon::canonical_form;
use crate::datapath::{Configuration, MergedDatapath, NodeKind};
use crate::graph::{DataflowGraph, GraphBuilder};
use crate::miner::{relabel, Pattern};
use crate::op::OpKind;
use crate::sim::{self, InputVector, SimError, SimResult};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PeSpecError {
    #[error("datapath has no configurations")]
    NoConfigurations,
    #[error("invalid PE spec document: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeOutput {
    pub name: String,
    /// Unit id, or the output mux id.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputMux {
    pub id: String,
    pub legs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstRegister {
    pub node: String,
    pub field: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeConfiguration {
    pub name: String,
    pub mux_settings: BTreeMap<String, usize>,
    pub op_selects: BTreeMap<String, OpKind>,
    /// Default const / LUT values; instances override them.
    #[serde(default)]
    pub values: BTreeMap<String, u16>,
    pub pattern: Pattern,
    /// pattern node -> unit
    pub node_map: BTreeMap<String, String>,
    /// pattern node -> unit port per pattern input port
    pub port_map: BTreeMap<String, Vec<usize>>,
    /// Output mux leg, when the PE has an output mux.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_select: Option<usize>,
    /// pattern sink node -> PE output name
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeSpec {
    pub datapath: MergedDatapath,
    pub inputs: Vec<String>,
    pub outputs: Vec<PeOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_mux: Option<OutputMux>,
    pub const_registers: Vec<ConstRegister>,
    pub op_set: BTreeSet<OpKind>,
    pub mux_count: usize,
    pub config_bits: usize,
    pub configurations: Vec<PeConfiguration>,
}

fn select_bits(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Whether `port` of `unit` can take an external operand, and the mux setting
/// that selects it.
fn external_leg(dp: &MergedDatapath, unit: &str, port: usize) -> Option<Option<(String, usize)>> {
    match dp.driver(unit, port) {
        None => Some(None),
        Some(src) => match dp.node(src).map(|n| &n.kind) {
            Some(NodeKind::Mux { legs }) => (0..*legs)
                .find(|&leg| dp.driver(src, leg).is_none())
                .map(|leg| Some((src.to_string(), leg))),
            _ => None,
        },
    }
}

fn single_op_config(dp: &MergedDatapath, op: OpKind, output_units: &[String]) -> Option<Configuration> {
    'units: for (unit, ops) in dp.units() {
        if !ops.contains(&op) || !output_units.iter().any(|u| u == unit) {
            continue;
        }
        let mut mux_settings = BTreeMap::new();
        for p in 0..op.arity() {
            match external_leg(dp, unit, p) {
                Some(Some((mux, leg))) => {
                    mux_settings.insert(mux, leg);
                }
                Some(None) => {}
                None => continue 'units,
            }
        }
        let g = GraphBuilder::new().node(unit, op).build().expect("single node");
        let mut cfg = Configuration::identity(format!("single.{op}"), &g);
        cfg.mux_settings = mux_settings;
        return Some(cfg);
    }
    None
}

/// Named configurations deduplicated by computed pattern, then one
/// single-op configuration for each op not already available on its own.
pub fn enumerate_configurations(dp: &MergedDatapath) -> Vec<Configuration> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for cfg in &dp.configurations {
        if seen.insert(canonical_form(&cfg.source).key) {
            out.push(cfg.clone());
        }
    }
    let output_units = dp.output_units();
    for op in dp.op_set() {
        if !op.is_compute() {
            continue;
        }
        let single = out
            .iter()
            .any(|c| c.source.len() == 1 && c.source.op(0) == op);
        if single {
            continue;
        }
        match single_op_config(dp, op, &output_units) {
            Some(cfg) => {
                seen.insert(canonical_form(&cfg.source).key);
                out.push(cfg);
            }
            None => log::debug!("no unit can expose `{op}` on its own"),
        }
    }
    out
}

pub fn generate_pe_spec(dp: &MergedDatapath) -> Result<PeSpec, PeSpecError> {
    if dp.configurations.is_empty() {
        return Err(PeSpecError::NoConfigurations);
    }
    let configs = enumerate_configurations(dp);
    let mut output_units = dp.output_units();
    for c in &configs {
        for u in c.node_map.values() {
            let is_sink = c.source.sinks().iter().any(|&s| &c.node_map[&c.source.nodes()[s].id] == u);
            if is_sink && !output_units.contains(u) {
                output_units.push(u.clone());
            }
        }
    }
    let primary = |c: &Configuration| -> Vec<String> {
        c.source
            .sinks()
            .iter()
            .map(|&s| c.node_map[&c.source.nodes()[s].id].clone())
            .collect()
    };

    let taken: BTreeSet<&str> = dp.nodes.iter().map(|n| n.id.as_str()).collect();
    let output_mux = (output_units.len() > 1).then(|| {
        let mut id = "omux".to_string();
        let mut k = 1;
        while taken.contains(id.as_str()) {
            id = format!("omux_{k}");
            k += 1;
        }
        OutputMux {
            id,
            legs: output_units.clone(),
        }
    });
    let mut outputs = vec![PeOutput {
        name: "out0".into(),
        source: match &output_mux {
            Some(m) => m.id.clone(),
            None => output_units.first().cloned().unwrap_or_default(),
        },
    }];
    // secondary sinks get direct taps
    let mut taps: BTreeMap<String, String> = BTreeMap::new();
    for c in &configs {
        for u in primary(c).into_iter().skip(1) {
            if let std::collections::btree_map::Entry::Vacant(slot) = taps.entry(u) {
                let name = format!("out{}", outputs.len());
                outputs.push(PeOutput {
                    name: name.clone(),
                    source: slot.key().clone(),
                });
                slot.insert(name);
            }
        }
    }

    let configurations = configs
        .iter()
        .map(|c| {
            let form = canonical_form(&c.source);
            let pattern = Pattern {
                graph: relabel(&c.source, &form.order),
                canonical_key: form.key,
            };
            let pid = |src_id: &str| {
                let idx = c.source.index_of(src_id).expect("source node");
                let pos = form.order.iter().position(|&v| v == idx).expect("in order");
                format!("p{pos}")
            };
            let sinks = primary(c);
            let output_select = output_mux
                .as_ref()
                .and_then(|m| m.legs.iter().position(|u| Some(u) == sinks.first()));
            let mut outs = BTreeMap::new();
            for (k, &s) in c.source.sinks().iter().enumerate() {
                let id = &c.source.nodes()[s].id;
                let name = if k == 0 {
                    "out0".to_string()
                } else {
                    taps[&c.node_map[id]].clone()
                };
                outs.insert(pid(id), name);
            }
            PeConfiguration {
                name: c.name.clone(),
                mux_settings: c.mux_settings.clone(),
                op_selects: c.op_selects.clone(),
                values: c.values.clone(),
                node_map: c.node_map.iter().map(|(k, v)| (pid(k), v.clone())).collect(),
                port_map: c.port_map.iter().map(|(k, v)| (pid(k), v.clone())).collect(),
                pattern,
                output_select,
                outputs: outs,
            }
        })
        .collect();

    let const_registers: Vec<ConstRegister> = dp
        .units()
        .filter(|(_, ops)| ops.contains(&OpKind::Const))
        .map(|(id, _)| ConstRegister {
            node: id.to_string(),
            field: format!("{id}.value"),
        })
        .collect();
    let mux_bits: usize = dp.muxes().map(|(_, legs)| select_bits(legs)).sum::<usize>()
        + output_mux.as_ref().map_or(0, |m| select_bits(m.legs.len()));
    let op_bits: usize = dp.units().map(|(_, ops)| select_bits(ops.len())).sum();
    let value_bits: usize = dp
        .units()
        .map(|(_, ops)| {
            if ops.contains(&OpKind::Const) {
                16
            } else if ops.contains(&OpKind::Lut) {
                8
            } else {
                0
            }
        })
        .sum();
    Ok(PeSpec {
        inputs: dp.external_inputs(),
        outputs,
        const_registers,
        op_set: dp.op_set(),
        mux_count: dp.muxes().count() + usize::from(output_mux.is_some()),
        config_bits: mux_bits + op_bits + value_bits,
        output_mux,
        configurations,
        datapath: dp.clone(),
    })
}

impl PeSpec {
    pub fn configuration(&self, name: &str) -> Option<&PeConfiguration> {
        self.configurations.iter().find(|c| c.name == name)
    }

    /// `(pattern, configuration name)` pairs handed to the mapper.
    pub fn rewrite_patterns(&self) -> Vec<(&Pattern, &str)> {
        self.configurations
            .iter()
            .map(|c| (&c.pattern, c.name.as_str()))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PeSpecError> {
        serde_json::from_str(text).map_err(|e| PeSpecError::Parse(e.to_string()))
    }

    /// Pattern input key -> PE input key for configuration `cfg`.
    pub fn input_binding(&self, cfg: &PeConfiguration) -> BTreeMap<String, String> {
        self.datapath
            .bind_inputs(&cfg.pattern.graph, &cfg.node_map, &cfg.port_map, &cfg.mux_settings)
    }

    /// Evaluate configuration `cfg` with const / LUT overrides `values`
    /// (keyed by pattern node). Outputs are keyed by PE output name.
    pub fn simulate(
        &self,
        cfg: &PeConfiguration,
        values: &BTreeMap<String, u16>,
        x: &InputVector,
    ) -> Result<SimResult, SimError> {
        let mut unit_values = cfg.values.clone();
        for (p, v) in values {
            if let Some(u) = cfg.node_map.get(p) {
                unit_values.insert(u.clone(), *v);
            }
        }
        let mut r = self.datapath.simulate_config(
            &cfg.name,
            &cfg.op_selects,
            &cfg.mux_settings,
            &unit_values,
            x,
        )?;
        if cfg.output_select.is_some() {
            r.mux_events += 1;
        }
        let mut outputs = BTreeMap::new();
        for (p, name) in &cfg.outputs {
            outputs.insert(name.clone(), r.outputs[&cfg.node_map[p]]);
        }
        r.outputs = outputs;
        Ok(r)
    }

    /// Check every configuration against its pattern on `vectors` random
    /// operand vectors; returns one message per failing configuration.
    pub fn verify<R: Rng + ?Sized>(&self, vectors: usize, rng: &mut R) -> Vec<String> {
        let mut failures = Vec::new();
        for cfg in &self.configurations {
            let g = &cfg.pattern.graph;
            let keys = sim::required_inputs(g);
            let binding = self.input_binding(cfg);
            for _ in 0..vectors {
                let x = sim::random_inputs(&keys, rng);
                let dx: InputVector = binding.iter().map(|(k, d)| (d.clone(), x[k])).collect();
                let expected = sim::evaluate(g, &x).map(|(v, _)| v);
                let got = self.simulate(cfg, &BTreeMap::new(), &dx);
                let ok = match (&expected, &got) {
                    (Ok(v), Ok(r)) => cfg.outputs.iter().all(|(p, name)| {
                        r.outputs[name] == v[g.index_of(p).expect("pattern node")]
                    }),
                    _ => false,
                };
                if !ok {
                    failures.push(format!("{}: mismatch on {x:?}", cfg.name));
                    break;
                }
            }
        }
        failures
    }

    pub fn to_dot(&self) -> String {
        let mut dot = self.datapath.to_dot();
        dot.truncate(dot.trim_end().len() - 1);
        if let Some(m) = &self.output_mux {
            dot.push_str(&format!("  \"{}\" [label=\"MUX\", shape=trapezium];\n", m.id));
            for (leg, u) in m.legs.iter().enumerate() {
                dot.push_str(&format!("  \"{u}\" -> \"{}\" [label=\"{leg}\"];\n", m.id));
            }
        }
        for o in &self.outputs {
            dot.push_str(&format!("  \"{}\" [shape=plaintext];\n  \"{}\" -> \"{}\";\n", o.name, o.source, o.name));
        }
        for i in &self.inputs {
            let (node, port) = i.rsplit_once('.').expect("port key");
            dot.push_str(&format!(
                "  \"{i}\" [shape=plaintext];\n  \"{i}\" -> \"{node}\" [label=\"{port}\"];\n"
            ));
        }
        dot.push_str("}\n");
        dot
    }
}

/// Single-node graph, handy for baseline and degenerate specs.
pub fn single_op_graph(id: &str, op: OpKind) -> DataflowGraph {
    GraphBuilder::new().node(id, op).build().expect("single node")
}
