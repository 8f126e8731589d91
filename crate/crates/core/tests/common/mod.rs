//! Random graph generators and exhaustive reference implementations shared by
//! the integration tests and the acceptance runner.
#![allow(dead_code)]

use pe_dse::graph::{DataflowGraph, Edge, Node};
use pe_dse::iso::Embedding;
use pe_dse::op::OpKind;
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};

pub const COMPUTE_POOL: [OpKind; 12] = [
    OpKind::Add,
    OpKind::Sub,
    OpKind::Mul,
    OpKind::Shl,
    OpKind::Xor,
    OpKind::And,
    OpKind::Min,
    OpKind::Lt,
    OpKind::Not,
    OpKind::Abs,
    OpKind::Sel,
    OpKind::Absd,
];

/// Random connected-or-not DAG of datapath ops drawn from at most `kinds`
/// distinct op kinds (constants count as one kind when `consts` is set).
pub fn random_datapath_graph<R: Rng>(rng: &mut R, max_nodes: usize, kinds: usize, consts: bool) -> DataflowGraph {
    let mut palette: Vec<OpKind> = COMPUTE_POOL.choose_multiple(rng, kinds.max(1)).copied().collect();
    if consts && palette.len() > 1 {
        palette.pop();
        palette.push(OpKind::Const);
    }
    let n = rng.gen_range(1..=max_nodes);
    let mut nodes = Vec::with_capacity(n);
    let mut edges = Vec::new();
    for i in 0..n {
        let op = *palette.choose(rng).expect("palette");
        nodes.push(Node {
            id: format!("n{i}"),
            op,
            value: op.has_value().then(|| rng.gen()),
        });
        if i == 0 {
            continue;
        }
        for port in 0..op.arity() {
            if rng.gen_bool(0.6) {
                let src = rng.gen_range(0..i);
                edges.push(Edge {
                    src: format!("n{src}"),
                    src_port: 0,
                    dst: format!("n{i}"),
                    dst_port: port,
                });
            }
        }
    }
    DataflowGraph::new(nodes, edges).expect("generator keeps graphs valid")
}

/// Random connected datapath graph (every node after the first reads an
/// earlier one, or feeds a later one).
pub fn random_connected_graph<R: Rng>(rng: &mut R, max_nodes: usize, ops: &[OpKind]) -> DataflowGraph {
    loop {
        let n = rng.gen_range(1..=max_nodes);
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for i in 0..n {
            // only the first node may be a constant, so every later node can be driven
            let op = if i == 0 {
                *ops.choose(rng).expect("ops")
            } else {
                **ops
                    .iter()
                    .filter(|o| o.arity() > 0)
                    .collect::<Vec<_>>()
                    .choose(rng)
                    .expect("driveable op")
            };
            nodes.push(Node {
                id: format!("g{i}"),
                op,
                value: op.has_value().then(|| rng.gen()),
            });
            if i == 0 {
                continue;
            }
            let mut ports: Vec<usize> = (0..op.arity()).collect();
            ports.shuffle(rng);
            let driven = rng.gen_range(1..=ports.len());
            for &port in &ports[..driven] {
                edges.push(Edge {
                    src: format!("g{}", rng.gen_range(0..i)),
                    src_port: 0,
                    dst: format!("g{i}"),
                    dst_port: port,
                });
            }
        }
        let g = DataflowGraph::new(nodes, edges).expect("valid");
        if g.is_connected() {
            return g;
        }
    }
}

/// Random application: inputs, constants, compute nodes from `ops`, an
/// optional mem node and outputs on every compute sink.
pub fn random_application<R: Rng>(rng: &mut R, compute: usize, ops: &[OpKind], with_mem: bool) -> DataflowGraph {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let inputs = rng.gen_range(1..=3);
    let mut sources: Vec<String> = Vec::new();
    for i in 0..inputs {
        nodes.push(Node {
            id: format!("in{i}"),
            op: OpKind::Input,
            value: None,
        });
        sources.push(format!("in{i}"));
    }
    for i in 0..rng.gen_range(0..=2) {
        nodes.push(Node {
            id: format!("k{i}"),
            op: OpKind::Const,
            value: Some(rng.gen()),
        });
        sources.push(format!("k{i}"));
    }
    let mut compute_ids: Vec<String> = Vec::new();
    for i in 0..compute {
        let op = *ops.choose(rng).expect("ops");
        let id = format!("c{i}");
        nodes.push(Node {
            id: id.clone(),
            op,
            value: op.has_value().then(|| rng.gen()),
        });
        for port in 0..op.arity() {
            // prefer recent compute results so chains form
            let src = if !compute_ids.is_empty() && rng.gen_bool(0.7) {
                let lo = compute_ids.len().saturating_sub(4);
                compute_ids[rng.gen_range(lo..compute_ids.len())].clone()
            } else if rng.gen_bool(0.85) {
                sources.choose(rng).expect("sources").clone()
            } else {
                continue;
            };
            edges.push(Edge {
                src,
                src_port: 0,
                dst: id.clone(),
                dst_port: port,
            });
        }
        compute_ids.push(id);
        if with_mem && i == compute / 2 {
            nodes.push(Node {
                id: "mem0".into(),
                op: OpKind::Mem,
                value: None,
            });
            edges.push(Edge {
                src: compute_ids.last().expect("compute").clone(),
                src_port: 0,
                dst: "mem0".into(),
                dst_port: 0,
            });
            compute_ids.push("mem0".into());
        }
    }
    let mut g = DataflowGraph::new(nodes.clone(), edges.clone()).expect("valid");
    let sinks: Vec<String> = g
        .sinks()
        .into_iter()
        .filter(|&s| g.op(s).is_compute())
        .map(|s| g.nodes()[s].id.clone())
        .collect();
    for (k, s) in sinks.into_iter().enumerate() {
        nodes.push(Node {
            id: format!("out{k}"),
            op: OpKind::Output,
            value: None,
        });
        edges.push(Edge {
            src: s,
            src_port: 0,
            dst: format!("out{k}"),
            dst_port: 0,
        });
    }
    g = DataflowGraph::new(nodes, edges).expect("valid");
    g
}

/// Undirected connectivity of a node subset by breadth-first search.
pub fn subset_connected(g: &DataflowGraph, subset: &[usize]) -> bool {
    if subset.is_empty() {
        return false;
    }
    let set: BTreeSet<usize> = subset.iter().copied().collect();
    let mut seen = BTreeSet::from([subset[0]]);
    let mut stack = vec![subset[0]];
    while let Some(v) = stack.pop() {
        for (ei, _) in g.edges().iter().enumerate() {
            let (s, d) = (g.src_index(ei), g.dst_index(ei));
            let next = if s == v {
                d
            } else if d == v {
                s
            } else {
                continue;
            };
            if set.contains(&next) && seen.insert(next) {
                stack.push(next);
            }
        }
    }
    seen.len() == set.len()
}

fn edge_multiset(g: &DataflowGraph, map: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut out: Vec<(usize, usize, usize)> = g
        .edges()
        .iter()
        .enumerate()
        .map(|(ei, e)| {
            let d = g.dst_index(ei);
            let port = if g.op(d).is_commutative() { usize::MAX } else { e.dst_port };
            (map[g.src_index(ei)], map[d], port)
        })
        .collect();
    out.sort_unstable();
    out
}

/// Isomorphism by trying every op-preserving bijection.
pub fn brute_isomorphic(a: &DataflowGraph, b: &DataflowGraph) -> bool {
    if a.len() != b.len() || a.edges().len() != b.edges().len() {
        return false;
    }
    let mut ops_a: Vec<OpKind> = a.nodes().iter().map(|n| n.op).collect();
    let mut ops_b: Vec<OpKind> = b.nodes().iter().map(|n| n.op).collect();
    ops_a.sort();
    ops_b.sort();
    if ops_a != ops_b {
        return false;
    }
    let target = edge_multiset(b, &(0..b.len()).collect::<Vec<_>>());
    let mut map = vec![usize::MAX; a.len()];
    let mut used = vec![false; b.len()];
    fn rec(
        i: usize,
        a: &DataflowGraph,
        b: &DataflowGraph,
        map: &mut Vec<usize>,
        used: &mut Vec<bool>,
        target: &[(usize, usize, usize)],
    ) -> bool {
        if i == a.len() {
            return edge_multiset(a, map) == target;
        }
        for j in 0..b.len() {
            if used[j] || a.op(i) != b.op(j) {
                continue;
            }
            map[i] = j;
            used[j] = true;
            if rec(i + 1, a, b, map, used, target) {
                return true;
            }
            used[j] = false;
        }
        false
    }
    rec(0, a, b, &mut map, &mut used, &target)
}

/// Connected induced subgraphs grouped into isomorphism classes: one entry per
/// class with its sorted node-id sets, sorted.
pub fn brute_mine(g: &DataflowGraph, min_support: usize, max_nodes: usize, include_const: bool) -> Vec<Vec<Vec<String>>> {
    let region: Vec<usize> = (0..g.len())
        .filter(|&i| g.op(i).is_compute() || (include_const && g.op(i) == OpKind::Const))
        .collect();
    let mut classes: Vec<(DataflowGraph, Vec<Vec<String>>)> = Vec::new();
    for mask in 1u32..(1 << region.len()) {
        if mask.count_ones() as usize > max_nodes {
            continue;
        }
        let subset: Vec<usize> = (0..region.len())
            .filter(|&b| mask & (1 << b) != 0)
            .map(|b| region[b])
            .collect();
        if subset.len() == 1 && g.op(subset[0]) == OpKind::Const {
            continue;
        }
        if !subset_connected(g, &subset) {
            continue;
        }
        let induced = g.induced_subgraph(&subset);
        let mut ids: Vec<String> = subset.iter().map(|&i| g.nodes()[i].id.clone()).collect();
        ids.sort();
        match classes.iter_mut().find(|(rep, _)| brute_isomorphic(rep, &induced)) {
            Some((_, sets)) => sets.push(ids),
            None => classes.push((induced, vec![ids])),
        }
    }
    let mut out: Vec<Vec<Vec<String>>> = classes
        .into_iter()
        .filter(|(_, sets)| sets.len() >= min_support)
        .map(|(_, mut sets)| {
            sets.sort();
            sets
        })
        .collect();
    out.sort();
    out
}

/// Heaviest clique by checking every vertex subset.
pub fn brute_clique(weights: &[f64], adj: &[Vec<bool>]) -> f64 {
    let n = weights.len();
    let masks: Vec<u32> = (0..n)
        .map(|v| (0..n).filter(|&u| adj[v][u]).fold(0, |m, u| m | (1 << u)))
        .collect();
    let mut is_clique = vec![false; 1 << n];
    let mut weight = vec![0.0f64; 1 << n];
    is_clique[0] = true;
    let mut best = 0.0f64;
    for s in 1usize..(1 << n) {
        let low = s.trailing_zeros() as usize;
        let rest = s & (s - 1);
        is_clique[s] = is_clique[rest] && (masks[low] as usize & rest) == rest;
        if is_clique[s] {
            weight[s] = weight[rest] + weights[low];
            best = best.max(weight[s]);
        }
    }
    best
}

/// Largest independent set size by checking every vertex subset.
pub fn brute_mis(n: usize, edges: &[(usize, usize)]) -> usize {
    let mut best = 0;
    for s in 0u32..(1 << n) {
        if edges.iter().all(|&(a, b)| s & (1 << a) == 0 || s & (1 << b) == 0) {
            best = best.max(s.count_ones() as usize);
        }
    }
    best
}

/// Fewest pairwise disjoint sets whose union is `universe`.
pub fn brute_min_cover(universe: &BTreeSet<String>, sets: &[BTreeSet<String>]) -> Option<usize> {
    fn rec(
        uncovered: &BTreeSet<String>,
        sets: &[BTreeSet<String>],
        used: usize,
        best: &mut Option<usize>,
    ) {
        if best.is_some_and(|b| used >= b) {
            return;
        }
        let Some(first) = uncovered.iter().next() else {
            *best = Some(used);
            return;
        };
        for s in sets.iter().filter(|s| s.contains(first)) {
            if s.is_subset(uncovered) {
                let rest: BTreeSet<String> = uncovered.difference(s).cloned().collect();
                rec(&rest, sets, used + 1, best);
            }
        }
    }
    let mut best = None;
    rec(universe, sets, 0, &mut best);
    best
}

/// Pattern occurrences by trying every injective op-preserving assignment and
/// keeping the induced, port-consistent ones; deduplicated by node set.
pub fn brute_embeddings(pattern: &DataflowGraph, g: &DataflowGraph) -> BTreeSet<Vec<String>> {
    let mut found = BTreeSet::new();
    let p = pattern.len();
    let mut map = vec![usize::MAX; p];
    let mut used = vec![false; g.len()];
    fn rec(
        i: usize,
        pattern: &DataflowGraph,
        g: &DataflowGraph,
        map: &mut Vec<usize>,
        used: &mut Vec<bool>,
        found: &mut BTreeSet<Vec<String>>,
    ) {
        if i == pattern.len() {
            let subset: Vec<usize> = map.clone();
            let induced = g.induced_subgraph(&subset);
            // induced subgraph nodes follow `subset` order, so map is the identity
            let idx: BTreeMap<&str, usize> = induced.nodes().iter().enumerate().map(|(k, n)| (n.id.as_str(), k)).collect();
            let relabel: Vec<usize> = map.iter().map(|&v| idx[g.nodes()[v].id.as_str()]).collect();
            if edge_multiset(pattern, &relabel) == edge_multiset(&induced, &(0..induced.len()).collect::<Vec<_>>()) {
                let mut ids: Vec<String> = map.iter().map(|&v| g.nodes()[v].id.clone()).collect();
                ids.sort();
                found.insert(ids);
            }
            return;
        }
        for j in 0..g.len() {
            if used[j] || pattern.op(i) != g.op(j) || g.op(j) == OpKind::Mem {
                continue;
            }
            map[i] = j;
            used[j] = true;
            rec(i + 1, pattern, g, map, used, found);
            used[j] = false;
        }
    }
    if p > 0 {
        rec(0, pattern, g, &mut map, &mut used, &mut found);
    }
    found
}

pub fn embedding_sets(embs: &[Embedding]) -> BTreeSet<Vec<String>> {
    embs.iter()
        .map(|e| e.nodes().into_iter().map(String::from).collect())
        .collect()
}
