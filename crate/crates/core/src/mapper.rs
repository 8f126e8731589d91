//! Covering an application with PE instances.
//!
//! Configurations are tried from the largest pattern down. For each one the
//! legal embeddings on the still uncovered nodes are collected, their overlap
//! graph is built and an independent set of it becomes new instances. Values
//! computed inside an instance may only leave it through a pattern sink, since
//! only sinks reach a PE output.
//!
//! Application constants are absorbed into the constant registers of the
//! instances that match them. Constants still feeding a node outside any
//! instance stay in the netlist as constant sources.

use crate::graph::{port_key, DataflowGraph};
use crate::iso::{find_embeddings, port_correspondence, Embedding};
use crate::mis::{maximal_independent_set, OverlapGraph, DEFAULT_EXACT_THRESHOLD};
use crate::op::{OpKind, MEM_PORTS};
use crate::pe_spec::{PeConfiguration, PeSpec};
use crate::sim::{InputVector, SimError, SimResult};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MapError {
    #[error("node `{node}` ({op}) cannot be implemented by the PE")]
    UnmappableOp { node: String, op: OpKind },
    #[error("netlist refers to unknown configuration `{0}`")]
    UnknownConfig(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid netlist document: {0}")]
    Parse(String),
}

/// One end of a netlist connection.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Endpoint {
    /// PE port: an input key as a destination, an output name as a source.
    Instance { instance: String, port: String },
    Input { node: String },
    /// An application port with no driver.
    External { key: String },
    Const { node: String },
    Mem { node: String, port: usize },
    Output { node: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connection {
    pub src: Endpoint,
    pub dst: Endpoint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub configuration: String,
    /// pattern node -> application node
    pub embedding: Embedding,
    /// Const / LUT values by pattern node.
    #[serde(default)]
    pub const_values: BTreeMap<String, u16>,
    /// application node -> PE output carrying its value
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstSource {
    pub node: String,
    pub value: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mapping {
    pub instances: Vec<Instance>,
    pub mem_instances: Vec<String>,
    pub const_sources: Vec<ConstSource>,
    pub connections: Vec<Connection>,
    /// Application sink / output node -> endpoint holding its value.
    pub sinks: BTreeMap<String, Endpoint>,
}

impl Mapping {
    pub fn pe_count(&self) -> usize {
        self.instances.len()
    }

    /// Input keys the netlist reads, sorted.
    pub fn required_inputs(&self) -> Vec<String> {
        let mut keys = BTreeSet::new();
        for c in &self.connections {
            match &c.src {
                Endpoint::Input { node } => keys.insert(node.clone()),
                Endpoint::External { key } => keys.insert(key.clone()),
                _ => false,
            };
        }
        for ep in self.sinks.values() {
            if let Endpoint::Input { node } = ep {
                keys.insert(node.clone());
            }
        }
        keys.into_iter().collect()
    }

    /// Instances per configuration name.
    pub fn histogram(&self) -> BTreeMap<String, usize> {
        let mut h = BTreeMap::new();
        for i in &self.instances {
            *h.entry(i.configuration.clone()).or_default() += 1;
        }
        h
    }
}

fn legal(pattern: &DataflowGraph, app: &DataflowGraph, emb: &Embedding, covered: &[bool]) -> bool {
    let inside: BTreeSet<&str> = emb.nodes();
    for (pi, pn) in pattern.nodes().iter().enumerate() {
        let ai = app.index_of(&emb.node_map[&pn.id]).expect("embedded node");
        if pn.op == OpKind::Const {
            continue;
        }
        if covered[ai] {
            return false;
        }
        if pattern.out_edges(pi).is_empty() {
            continue;
        }
        let escapes = app
            .out_edges(ai)
            .iter()
            .any(|&ei| !inside.contains(app.edges()[ei].dst.as_str()));
        if escapes {
            return false;
        }
    }
    true
}

/// Cover every compute node of `app` with instances of `spec`'s configurations.
pub fn map_application(app: &DataflowGraph, spec: &PeSpec) -> Result<Mapping, MapError> {
    for n in app.nodes() {
        if n.op.is_compute() && !spec.op_set.contains(&n.op) {
            return Err(MapError::UnmappableOp {
                node: n.id.clone(),
                op: n.op,
            });
        }
    }
    let mut order: Vec<&PeConfiguration> = spec.configurations.iter().collect();
    order.sort_by_key(|c| std::cmp::Reverse(c.pattern.node_count()));

    let mut covered = vec![false; app.len()];
    let mut chosen: Vec<(&PeConfiguration, Embedding)> = Vec::new();
    for cfg in order {
        let pattern = &cfg.pattern.graph;
        if pattern.nodes().iter().all(|n| n.op == OpKind::Const) {
            continue;
        }
        let embs: Vec<Embedding> = find_embeddings(pattern, app)
            .into_iter()
            .filter(|e| legal(pattern, app, e, &covered))
            .collect();
        if embs.is_empty() {
            continue;
        }
        let compute_sets: Vec<BTreeSet<&str>> = embs
            .iter()
            .map(|e| {
                e.node_map
                    .values()
                    .map(String::as_str)
                    .filter(|id| app.node(id).is_some_and(|n| n.op.is_compute()))
                    .collect()
            })
            .collect();
        let og = OverlapGraph::from_sets(&compute_sets);
        let (pick, _) = maximal_independent_set(&og, DEFAULT_EXACT_THRESHOLD);
        log::debug!("{}: {} legal embeddings, {} placed", cfg.name, embs.len(), pick.len());
        for &i in &pick {
            for id in &compute_sets[i] {
                covered[app.index_of(id).expect("app node")] = true;
            }
        }
        for i in pick {
            chosen.push((cfg, embs[i].clone()));
        }
    }
    if let Some(i) = (0..app.len()).find(|&i| app.op(i).is_compute() && !covered[i]) {
        let n = &app.nodes()[i];
        return Err(MapError::UnmappableOp {
            node: n.id.clone(),
            op: n.op,
        });
    }
    Ok(build_netlist(app, spec, chosen))
}

fn build_netlist(app: &DataflowGraph, spec: &PeSpec, chosen: Vec<(&PeConfiguration, Embedding)>) -> Mapping {
    // compute node -> (instance id, PE output)
    let mut owner: BTreeMap<String, (String, Option<String>)> = BTreeMap::new();
    let mut instances = Vec::new();
    for (k, (cfg, emb)) in chosen.iter().enumerate() {
        let id = format!("pe{k}");
        let mut outputs = BTreeMap::new();
        for (p, a) in &emb.node_map {
            let op = app.node(a).expect("app node").op;
            if op == OpKind::Const {
                continue;
            }
            let out = cfg.outputs.get(p).cloned();
            if let Some(o) = &out {
                outputs.insert(a.clone(), o.clone());
            }
            owner.insert(a.clone(), (id.clone(), out));
        }
        let const_values = cfg
            .pattern
            .graph
            .nodes()
            .iter()
            .filter(|n| n.op.has_value())
            .map(|n| {
                let a = app.node(&emb.node_map[&n.id]).expect("app node");
                (n.id.clone(), a.value.unwrap_or(0))
            })
            .collect();
        instances.push(Instance {
            id,
            configuration: cfg.name.clone(),
            embedding: emb.clone(),
            const_values,
            outputs,
        });
    }

    let mut const_used = BTreeSet::new();
    let mut source_of = |src: usize, const_used: &mut BTreeSet<String>| -> Endpoint {
        let n = &app.nodes()[src];
        match n.op {
            OpKind::Input => Endpoint::Input { node: n.id.clone() },
            OpKind::Const => {
                const_used.insert(n.id.clone());
                Endpoint::Const { node: n.id.clone() }
            }
            OpKind::Mem => Endpoint::Mem {
                node: n.id.clone(),
                port: 0,
            },
            _ => {
                let (inst, out) = &owner[&n.id];
                Endpoint::Instance {
                    instance: inst.clone(),
                    port: out.clone().expect("values leave instances through sinks"),
                }
            }
        }
    };
    let driver_endpoint =
        |node: usize, port: usize, const_used: &mut BTreeSet<String>, source_of: &mut dyn FnMut(usize, &mut BTreeSet<String>) -> Endpoint| {
            match app.driver(node, port) {
                Some(ei) => source_of(app.src_index(ei), const_used),
                None => Endpoint::External {
                    key: port_key(&app.nodes()[node].id, port),
                },
            }
        };

    let mut connections = Vec::new();
    for (inst, (cfg, emb)) in instances.iter().zip(&chosen) {
        let pattern = &cfg.pattern.graph;
        let corr = port_correspondence(pattern, app, emb);
        let binding = spec.input_binding(cfg);
        for (pi, pn) in pattern.nodes().iter().enumerate() {
            for q in 0..pn.op.arity() {
                if pattern.driver(pi, q).is_some() {
                    continue;
                }
                let a = app.index_of(&emb.node_map[&pn.id]).expect("app node");
                let src = driver_endpoint(a, corr[&(pn.id.clone(), q)], &mut const_used, &mut source_of);
                connections.push(Connection {
                    src,
                    dst: Endpoint::Instance {
                        instance: inst.id.clone(),
                        port: binding[&port_key(&pn.id, q)].clone(),
                    },
                });
            }
        }
    }
    let mut mem_instances = Vec::new();
    let mut sinks = BTreeMap::new();
    for (i, n) in app.nodes().iter().enumerate() {
        match n.op {
            OpKind::Mem => {
                mem_instances.push(n.id.clone());
                for p in 0..MEM_PORTS {
                    if p > 0 && app.driver(i, p).is_none() {
                        continue;
                    }
                    let src = driver_endpoint(i, p, &mut const_used, &mut source_of);
                    connections.push(Connection {
                        src,
                        dst: Endpoint::Mem {
                            node: n.id.clone(),
                            port: p,
                        },
                    });
                }
            }
            OpKind::Output => {
                let src = driver_endpoint(i, 0, &mut const_used, &mut source_of);
                connections.push(Connection {
                    src,
                    dst: Endpoint::Output { node: n.id.clone() },
                });
            }
            _ => {}
        }
        if n.op == OpKind::Output {
            sinks.insert(n.id.clone(), Endpoint::Output { node: n.id.clone() });
        } else if app.out_edges(i).is_empty() {
            sinks.insert(n.id.clone(), source_of(i, &mut const_used));
        }
    }
    let const_sources = const_used
        .into_iter()
        .map(|id| ConstSource {
            value: app.node(&id).and_then(|n| n.value).unwrap_or(0),
            node: id,
        })
        .collect();
    Mapping {
        instances,
        mem_instances,
        const_sources,
        connections,
        sinks,
    }
}

pub fn emit_netlist(m: &Mapping) -> String {
    serde_json::to_string_pretty(m).expect("netlist serializes")
}

pub fn parse_netlist(text: &str) -> Result<Mapping, MapError> {
    serde_json::from_str(text).map_err(|e| MapError::Parse(e.to_string()))
}

/// Check that every compute node of `app` is covered exactly once.
pub fn check_cover(app: &DataflowGraph, m: &Mapping) -> Result<(), String> {
    let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
    for inst in &m.instances {
        for a in inst.embedding.node_map.values() {
            let Some(n) = app.node(a) else {
                return Err(format!("{}: unknown node {a}", inst.id));
            };
            if n.op == OpKind::Const {
                continue;
            }
            if let Some(prev) = seen.insert(a, &inst.id) {
                return Err(format!("{a} covered by {prev} and {}", inst.id));
            }
        }
    }
    for n in app.nodes() {
        if n.op.is_compute() && !seen.contains_key(n.id.as_str()) {
            return Err(format!("{} not covered", n.id));
        }
    }
    Ok(())
}

/// Evaluate the mapped netlist. Outputs are keyed like
/// [`simulate`](crate::sim::simulate) on the application.
pub fn simulate_mapping(m: &Mapping, spec: &PeSpec, x: &InputVector) -> Result<SimResult, MapError> {
    let configs: Vec<&PeConfiguration> = m
        .instances
        .iter()
        .map(|i| {
            spec.configuration(&i.configuration)
                .ok_or_else(|| MapError::UnknownConfig(i.configuration.clone()))
        })
        .collect::<Result<_, _>>()?;
    let consts: BTreeMap<&str, u16> = m.const_sources.iter().map(|c| (c.node.as_str(), c.value)).collect();
    // value held by each source endpoint
    let mut state: BTreeMap<Endpoint, u16> = BTreeMap::new();
    let mut stats = Vec::new();
    let rounds = m.instances.len() + m.mem_instances.len() + m.sinks.len() + 1;
    for _ in 0..rounds {
        let read = |src: &Endpoint| -> Result<u16, MapError> {
            Ok(match src {
                Endpoint::Input { node } => *x.get(node).ok_or_else(|| SimError::MissingInput(node.clone()))?,
                Endpoint::External { key } => *x.get(key).ok_or_else(|| SimError::MissingInput(key.clone()))?,
                Endpoint::Const { node } => consts.get(node.as_str()).copied().unwrap_or(0),
                other => state.get(other).copied().unwrap_or(0),
            })
        };
        let mut inst_inputs: BTreeMap<&str, InputVector> = BTreeMap::new();
        let mut next: BTreeMap<Endpoint, u16> = BTreeMap::new();
        for c in &m.connections {
            let v = read(&c.src)?;
            match &c.dst {
                Endpoint::Instance { instance, port } => {
                    inst_inputs.entry(instance.as_str()).or_default().insert(port.clone(), v);
                }
                Endpoint::Mem { node, port: 0 } => {
                    next.insert(Endpoint::Mem { node: node.clone(), port: 0 }, v);
                }
                Endpoint::Output { node } => {
                    next.insert(Endpoint::Output { node: node.clone() }, v);
                }
                _ => {}
            }
        }
        stats.clear();
        for (inst, cfg) in m.instances.iter().zip(&configs) {
            let dx = inst_inputs.remove(inst.id.as_str()).unwrap_or_default();
            let r = spec.simulate(cfg, &inst.const_values, &dx)?;
            for (port, v) in &r.outputs {
                next.insert(
                    Endpoint::Instance {
                        instance: inst.id.clone(),
                        port: port.clone(),
                    },
                    *v,
                );
            }
            stats.push(r);
        }
        let done = next == state;
        state = next;
        if done {
            break;
        }
    }
    let mut result = SimResult::default();
    for r in &stats {
        result.absorb(r);
    }
    for (node, ep) in &m.sinks {
        let v = match ep {
            Endpoint::Input { node } => x.get(node).copied().unwrap_or(0),
            Endpoint::Const { node } => consts.get(node.as_str()).copied().unwrap_or(0),
            other => state.get(other).copied().unwrap_or(0),
        };
        result.outputs.insert(node.clone(), v);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapath::MergedDatapath;
    use crate::fixtures;
    use crate::pe_spec::generate_pe_spec;
    use crate::sim::{random_inputs, required_inputs, simulate};
    use rand::SeedableRng;

    fn baseline(ops: &[OpKind]) -> PeSpec {
        let dp = MergedDatapath::single_unit("pe", &ops.iter().copied().collect());
        generate_pe_spec(&dp).unwrap()
    }

    #[test]
    fn adds_need_one_pe_each() {
        let mut b = crate::graph::GraphBuilder::new();
        b.node("a0", OpKind::Add);
        for i in 1..5 {
            b.node(format!("a{i}"), OpKind::Add).edge(format!("a{}", i - 1), format!("a{i}"), 0);
        }
        let g = b.build().unwrap();
        let m = map_application(&g, &baseline(&[OpKind::Add])).unwrap();
        assert_eq!(m.pe_count(), 5);
        check_cover(&g, &m).unwrap();
    }

    #[test]
    fn missing_op_is_reported() {
        let g = crate::graph::GraphBuilder::new()
            .node("s", OpKind::Shl)
            .build()
            .unwrap();
        assert_eq!(
            map_application(&g, &baseline(&[OpKind::Add])),
            Err(MapError::UnmappableOp {
                node: "s".into(),
                op: OpKind::Shl
            })
        );
    }

    #[test]
    fn convolution_on_baseline_matches_reference() {
        let g = fixtures::convolution_with_weights([3, 5, 7, 9]);
        let spec = baseline(&[OpKind::Add, OpKind::Mul]);
        let m = map_application(&g, &spec).unwrap();
        assert_eq!(m.pe_count(), 8);
        assert_eq!(m.const_sources.len(), 4);
        let back = parse_netlist(&emit_netlist(&m)).unwrap();
        assert_eq!(back, m);
        let keys = required_inputs(&g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let x = random_inputs(&keys, &mut rng);
            assert_eq!(
                simulate_mapping(&m, &spec, &x).unwrap().outputs,
                simulate(&g, &x).unwrap().outputs
            );
        }
    }
}
