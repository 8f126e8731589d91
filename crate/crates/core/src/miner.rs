//! Frequent connected subgraph mining on a single application graph.
//!
//! Support is the number of distinct node sets whose induced subgraph is
//! isomorphic to the pattern. That count is not anti-monotone under fan-out
//! (one constant feeding four multipliers has support 1 while `const -> mul`
//! has support 4), so the miner enumerates every connected induced subgraph
//! up to the size cap (ESU enumeration) and groups them by canonical key
//! instead of pruning on the parent's support.

use crate::canon::{canonical_form, CanonicalKey};
use crate::graph::{DataflowGraph, Edge, GraphError, Node};
use crate::iso::Embedding;
use crate::op::OpKind;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// A connected pattern with its canonical key. Node ids are `p0, p1, ...` in
/// canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pattern {
    pub graph: DataflowGraph,
    pub canonical_key: CanonicalKey,
}

impl Pattern {
    /// Canonicalise a connected graph into a pattern, renaming its nodes.
    pub fn new(g: &DataflowGraph) -> Result<Self, GraphError> {
        if !g.is_connected() {
            return Err(GraphError::Disconnected);
        }
        let form = canonical_form(g);
        Ok(Pattern {
            graph: relabel(g, &form.order),
            canonical_key: form.key,
        })
    }

    pub fn node_count(&self) -> usize {
        self.graph.len()
    }

    /// Nodes other than constants.
    pub fn compute_nodes(&self) -> usize {
        self.graph
            .nodes()
            .iter()
            .filter(|n| n.op != OpKind::Const)
            .count()
    }
}

pub(crate) fn relabel(g: &DataflowGraph, order: &[usize]) -> DataflowGraph {
    let mut names = vec![String::new(); g.len()];
    for (pos, &v) in order.iter().enumerate() {
        names[v] = format!("p{pos}");
    }
    let nodes = order
        .iter()
        .map(|&v| Node {
            id: names[v].clone(),
            op: g.op(v),
            value: g.nodes()[v].value,
        })
        .collect();
    let mut edges: Vec<Edge> = g
        .edges()
        .iter()
        .enumerate()
        .map(|(ei, e)| Edge {
            src: names[g.src_index(ei)].clone(),
            src_port: e.src_port,
            dst: names[g.dst_index(ei)].clone(),
            dst_port: e.dst_port,
        })
        .collect();
    edges.sort_by_key(|e| {
        (
            order.iter().position(|&v| names[v] == e.dst),
            e.dst_port,
        )
    });
    DataflowGraph::new(nodes, edges).expect("relabelled graph is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningConfig {
    pub min_support: usize,
    pub max_pattern_nodes: usize,
    pub include_const_nodes: bool,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            min_support: 2,
            max_pattern_nodes: 8,
            include_const_nodes: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MineError {
    #[error("min_support must be at least 1")]
    ZeroSupport,
    #[error("max_pattern_nodes must be at least 1")]
    ZeroSize,
}

impl MiningConfig {
    pub fn validate(&self) -> Result<(), MineError> {
        if self.min_support == 0 {
            return Err(MineError::ZeroSupport);
        }
        if self.max_pattern_nodes == 0 {
            return Err(MineError::ZeroSize);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinedPattern {
    pub pattern: Pattern,
    pub frequency: usize,
    pub embeddings: Vec<Embedding>,
}

/// Whether a node takes part in mining under `cfg`.
pub fn in_mined_region(op: OpKind, cfg: &MiningConfig) -> bool {
    op.is_compute() || (cfg.include_const_nodes && op == OpKind::Const)
}

/// Enumerate every connected node subset of the mined region with at most
/// `max_nodes` nodes, each exactly once, as sorted index lists.
pub fn connected_subsets(
    g: &DataflowGraph,
    region: &[bool],
    max_nodes: usize,
    mut visit: impl FnMut(&[usize]),
) {
    let adj: Vec<Vec<usize>> = (0..g.len())
        .map(|v| {
            g.neighbors(v)
                .into_iter()
                .filter(|&u| region[u])
                .collect()
        })
        .collect();
    let mut sub = Vec::with_capacity(max_nodes);
    for root in (0..g.len()).filter(|&v| region[v]) {
        let ext: Vec<usize> = adj[root].iter().copied().filter(|&u| u > root).collect();
        sub.push(root);
        esu_extend(&adj, &mut sub, ext, root, max_nodes, &mut visit);
        sub.pop();
    }
}

fn esu_extend(
    adj: &[Vec<usize>],
    sub: &mut Vec<usize>,
    mut ext: Vec<usize>,
    root: usize,
    max_nodes: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    let mut sorted = sub.clone();
    sorted.sort_unstable();
    visit(&sorted);
    if sub.len() == max_nodes {
        return;
    }
    while let Some(w) = ext.pop() {
        let mut next = ext.clone();
        for &u in &adj[w] {
            if u <= root || sub.contains(&u) || next.contains(&u) {
                continue;
            }
            // exclusive neighbourhood: not adjacent to the current subset
            if sub.iter().any(|&s| adj[s].contains(&u)) {
                continue;
            }
            next.push(u);
        }
        sub.push(w);
        esu_extend(adj, sub, next, root, max_nodes, visit);
        sub.pop();
    }
}

/// Mine all connected patterns with support >= `min_support`.
///
/// Sorted by node count descending, then canonical key ascending.
pub fn mine_frequent_subgraphs(
    g: &DataflowGraph,
    cfg: &MiningConfig,
) -> Result<Vec<MinedPattern>, MineError> {
    cfg.validate()?;
    let region: Vec<bool> = g
        .nodes()
        .iter()
        .map(|n| in_mined_region(n.op, cfg))
        .collect();
    let mut groups: HashMap<CanonicalKey, Vec<(Vec<String>, DataflowGraph, Vec<usize>)>> =
        HashMap::new();
    connected_subsets(g, &region, cfg.max_pattern_nodes, |subset| {
        if subset.len() == 1 && g.op(subset[0]) == OpKind::Const {
            return;
        }
        let induced = g.induced_subgraph(subset);
        let form = canonical_form(&induced);
        let mut ids: Vec<String> = subset.iter().map(|&i| g.nodes()[i].id.clone()).collect();
        ids.sort();
        groups
            .entry(form.key)
            .or_default()
            .push((ids, induced, form.order));
    });

    let mut mined: Vec<MinedPattern> = groups
        .into_iter()
        .filter(|(_, occ)| occ.len() >= cfg.min_support)
        .map(|(key, mut occ)| {
            occ.sort_by(|a, b| a.0.cmp(&b.0));
            let (_, rep, rep_order) = &occ[0];
            let pattern = Pattern {
                graph: relabel(rep, rep_order),
                canonical_key: key,
            };
            let embeddings = occ
                .iter()
                .map(|(_, induced, order)| Embedding {
                    node_map: order
                        .iter()
                        .enumerate()
                        .map(|(pos, &v)| (format!("p{pos}"), induced.nodes()[v].id.clone()))
                        .collect::<BTreeMap<_, _>>(),
                })
                .collect::<Vec<_>>();
            MinedPattern {
                pattern,
                frequency: embeddings.len(),
                embeddings,
            }
        })
        .collect();
    mined.sort_by(|a, b| {
        b.pattern
            .node_count()
            .cmp(&a.pattern.node_count())
            .then_with(|| a.pattern.canonical_key.cmp(&b.pattern.canonical_key))
    });
    Ok(mined)
}

/// Distinct operations present in the mined region of `g`.
pub fn region_ops(g: &DataflowGraph, cfg: &MiningConfig) -> BTreeSet<OpKind> {
    g.nodes()
        .iter()
        .map(|n| n.op)
        .filter(|&op| in_mined_region(op, cfg) && op != OpKind::Const)
        .collect()
}
