//! Datapath merging through maximum-weight cliques.
//!
//! Merging a graph `B` into a datapath `A` lists merge opportunities: a
//! node opportunity places a `B` node on an `A` unit sharing a hardware
//! block class, weighted by the area of the shared blocks; an edge
//! opportunity lines up an `A` connection with a `B` edge, weighted by the
//! mux leg it saves. Opportunities that can coexist are adjacent in the
//! compatibility graph and a maximum-weight clique selects the merge.

use crate::clique::max_weight_clique;
use crate::cost::{classes, CostError, CostTable};
use crate::datapath::{check_datapath_graph, Configuration, DatapathError, MergedDatapath};
use crate::graph::DataflowGraph;
use crate::mis::MisReport;
use crate::op::OpKind;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MergeError {
    #[error(transparent)]
    NotADatapath(#[from] DatapathError),
    #[error("selected opportunities map `{0}` inconsistently")]
    IncompatibleClique(String),
    #[error("no candidate patterns for variants beyond the baseline")]
    EmptyPatternList,
    #[error("baseline has no operation used by the application")]
    EmptyBaseline,
    #[error(transparent)]
    Cost(#[from] CostError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MergeOpportunity {
    Node {
        a: String,
        b: String,
        weight: f64,
    },
    Edge {
        a_src: String,
        a_dst: String,
        a_port: usize,
        b_src: String,
        b_dst: String,
        b_port: usize,
        weight: f64,
    },
}

impl MergeOpportunity {
    pub fn weight(&self) -> f64 {
        match self {
            MergeOpportunity::Node { weight, .. } | MergeOpportunity::Edge { weight, .. } => *weight,
        }
    }

    /// `(a unit, b node)` pairs this opportunity commits to.
    pub fn pairs(&self) -> Vec<(&str, &str)> {
        match self {
            MergeOpportunity::Node { a, b, .. } => vec![(a, b)],
            MergeOpportunity::Edge {
                a_src,
                a_dst,
                b_src,
                b_dst,
                ..
            } => vec![(a_src, b_src), (a_dst, b_dst)],
        }
    }
}

/// Unit-level connections of every configuration, looking through muxes.
pub fn logical_edges(dp: &MergedDatapath) -> BTreeSet<(String, String, usize)> {
    let mut out = BTreeSet::new();
    for cfg in &dp.configurations {
        for ((unit, port), src) in cfg.port_sources() {
            if let Some(src) = src {
                out.insert((src, unit, port));
            }
        }
    }
    out
}

fn shared_area(a_ops: &BTreeSet<OpKind>, b_op: OpKind, costs: &CostTable) -> Result<Option<f64>, CostError> {
    let b = classes(&BTreeSet::from([b_op]));
    let common: Vec<_> = classes(a_ops).intersection(&b).copied().collect();
    if common.is_empty() {
        return Ok(None);
    }
    let mut area = 0.0;
    for c in common {
        area += costs.block(c)?.area;
    }
    Ok(Some(area))
}

/// Node opportunities first (unit order, then `b` node order), then edge
/// opportunities (logical edge order, then `b` edge order).
pub fn enumerate_opportunities(
    a: &MergedDatapath,
    b: &DataflowGraph,
    costs: &CostTable,
) -> Result<Vec<MergeOpportunity>, MergeError> {
    check_datapath_graph(b)?;
    let mut out = Vec::new();
    let mut mergeable = BTreeSet::new();
    for (unit, ops) in a.units() {
        for n in b.nodes() {
            if let Some(weight) = shared_area(ops, n.op, costs)? {
                mergeable.insert((unit.to_string(), n.id.clone()));
                out.push(MergeOpportunity::Node {
                    a: unit.to_string(),
                    b: n.id.clone(),
                    weight,
                });
            }
        }
    }
    for (a_src, a_dst, a_port) in logical_edges(a) {
        for e in b.edges() {
            if !mergeable.contains(&(a_src.clone(), e.src.clone()))
                || !mergeable.contains(&(a_dst.clone(), e.dst.clone()))
            {
                continue;
            }
            let op = b.node(&e.dst).expect("validated edge").op;
            let ports_line_up = a_port == e.dst_port
                || (op.is_commutative() && a_port < op.arity() && e.dst_port < op.arity());
            if ports_line_up {
                out.push(MergeOpportunity::Edge {
                    a_src: a_src.clone(),
                    a_dst: a_dst.clone(),
                    a_port,
                    b_src: e.src.clone(),
                    b_dst: e.dst.clone(),
                    b_port: e.dst_port,
                    weight: costs.mux.leg_area,
                });
            }
        }
    }
    Ok(out)
}

pub fn compatible(x: &MergeOpportunity, y: &MergeOpportunity) -> bool {
    for (xa, xb) in x.pairs() {
        for (ya, yb) in y.pairs() {
            if (xa == ya) != (xb == yb) {
                return false;
            }
        }
    }
    if let (
        MergeOpportunity::Edge {
            a_dst: xd,
            a_port: xp,
            b_dst: xbd,
            b_port: xq,
            ..
        },
        MergeOpportunity::Edge {
            a_dst: yd,
            a_port: yp,
            b_dst: ybd,
            b_port: yq,
            ..
        },
    ) = (x, y)
    {
        if xd == yd && xbd == ybd && ((xq == yq) != (xp == yp)) {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityGraph {
    pub opportunities: Vec<MergeOpportunity>,
    pub edges: Vec<(usize, usize)>,
}

impl CompatibilityGraph {
    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        let n = self.opportunities.len();
        let mut adj = vec![vec![false; n]; n];
        for &(x, y) in &self.edges {
            adj[x][y] = true;
            adj[y][x] = true;
        }
        adj
    }

    pub fn weights(&self) -> Vec<f64> {
        self.opportunities.iter().map(MergeOpportunity::weight).collect()
    }

    /// Maximum-weight clique: sorted vertex indices and total weight.
    pub fn best_clique(&self) -> (Vec<usize>, f64) {
        max_weight_clique(&self.weights(), &self.adjacency())
    }
}

pub fn build_compatibility_graph(opportunities: Vec<MergeOpportunity>) -> CompatibilityGraph {
    let mut edges = Vec::new();
    for i in 0..opportunities.len() {
        for j in i + 1..opportunities.len() {
            if compatible(&opportunities[i], &opportunities[j]) {
                edges.push((i, j));
            }
        }
    }
    CompatibilityGraph { opportunities, edges }
}

fn fresh_id(base: &str, taken: &mut BTreeSet<String>) -> String {
    if taken.insert(base.to_string()) {
        return base.to_string();
    }
    let mut k = 1;
    loop {
        let id = format!("{base}_{k}");
        if taken.insert(id.clone()) {
            return id;
        }
        k += 1;
    }
}

/// Build the merged datapath for the opportunities selected by `clique`.
///
/// `b` becomes a new configuration called `name`.
pub fn reconstruct_merged(
    a: &MergedDatapath,
    b: &DataflowGraph,
    name: &str,
    opportunities: &[MergeOpportunity],
    clique: &[usize],
) -> Result<MergedDatapath, MergeError> {
    check_datapath_graph(b)?;
    let chosen: Vec<&MergeOpportunity> = clique.iter().map(|&i| &opportunities[i]).collect();
    let mut b_to_a: BTreeMap<String, String> = BTreeMap::new();
    let mut a_to_b: BTreeMap<String, String> = BTreeMap::new();
    for opp in &chosen {
        for (ua, nb) in opp.pairs() {
            let prev_a = b_to_a.insert(nb.to_string(), ua.to_string());
            let prev_b = a_to_b.insert(ua.to_string(), nb.to_string());
            if prev_a.is_some_and(|p| p != ua) {
                return Err(MergeError::IncompatibleClique(nb.to_string()));
            }
            if prev_b.is_some_and(|p| p != nb) {
                return Err(MergeError::IncompatibleClique(ua.to_string()));
            }
        }
    }

    let mut units = a.unit_list();
    let mut taken: BTreeSet<String> = a.nodes.iter().map(|n| n.id.clone()).collect();
    let mut node_map = BTreeMap::new();
    for n in b.nodes() {
        let unit = match b_to_a.get(&n.id) {
            Some(u) => {
                let entry = units.iter_mut().find(|(id, _)| id == u).expect("unit exists");
                if !entry.1.iter().any(|o| o.block_class() == n.op.block_class()) {
                    return Err(MergeError::IncompatibleClique(n.id.clone()));
                }
                entry.1.insert(n.op);
                u.clone()
            }
            None => {
                let id = fresh_id(&n.id, &mut taken);
                units.push((id.clone(), BTreeSet::from([n.op])));
                id
            }
        };
        node_map.insert(n.id.clone(), unit);
    }

    // commutative port choices pinned by selected edge opportunities
    let mut pinned: BTreeMap<(String, usize), usize> = BTreeMap::new();
    for opp in &chosen {
        if let MergeOpportunity::Edge {
            b_dst, b_port, a_port, ..
        } = opp
        {
            pinned.insert((b_dst.clone(), *b_port), *a_port);
        }
    }
    let mut existing: BTreeMap<(String, usize), BTreeSet<Option<String>>> = BTreeMap::new();
    for cfg in &a.configurations {
        for (k, src) in cfg.port_sources() {
            existing.entry(k).or_default().insert(src);
        }
    }
    let mut port_map = BTreeMap::new();
    for (i, n) in b.nodes().iter().enumerate() {
        let arity = n.op.arity();
        let identity: Vec<usize> = (0..arity).collect();
        let perm = if n.op.is_commutative() && arity == 2 {
            let swapped = vec![1, 0];
            let pins: Vec<(usize, usize)> = (0..arity)
                .filter_map(|q| pinned.get(&(n.id.clone(), q)).map(|&p| (q, p)))
                .collect();
            if let Some(&(q, p)) = pins.first() {
                if p == q {
                    identity
                } else {
                    swapped
                }
            } else {
                let unit = &node_map[&n.id];
                let cost = |perm: &[usize]| {
                    (0..arity)
                        .filter(|&q| {
                            let src = b.driver(i, q).map(|ei| node_map[&b.edges()[ei].src].clone());
                            existing
                                .get(&(unit.clone(), perm[q]))
                                .is_some_and(|set| !set.contains(&src))
                        })
                        .count()
                };
                if cost(&swapped) < cost(&identity) {
                    swapped
                } else {
                    identity
                }
            }
        } else {
            identity
        };
        port_map.insert(n.id.clone(), perm);
    }

    let cfg = Configuration {
        name: name.to_string(),
        source: b.clone(),
        op_selects: b
            .nodes()
            .iter()
            .map(|n| (node_map[&n.id].clone(), n.op))
            .collect(),
        values: b
            .nodes()
            .iter()
            .filter(|n| n.op.has_value())
            .map(|n| (node_map[&n.id].clone(), n.value.unwrap_or(0)))
            .collect(),
        node_map,
        port_map,
        mux_settings: BTreeMap::new(),
    };
    let mut configs = a.configurations.clone();
    configs.push(cfg);
    Ok(MergedDatapath::assemble(units, configs))
}

/// Result of merging one graph into a datapath.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeOutcome {
    pub datapath: MergedDatapath,
    pub compatibility: CompatibilityGraph,
    pub clique: Vec<usize>,
    pub clique_weight: f64,
}

pub fn merge_into(
    a: &MergedDatapath,
    b: &DataflowGraph,
    name: &str,
    costs: &CostTable,
) -> Result<MergeOutcome, MergeError> {
    let opps = enumerate_opportunities(a, b, costs)?;
    let compatibility = build_compatibility_graph(opps);
    let (clique, clique_weight) = compatibility.best_clique();
    log::debug!(
        "merge `{name}`: {} opportunities, clique weight {clique_weight}",
        compatibility.opportunities.len()
    );
    let datapath = reconstruct_merged(a, b, name, &compatibility.opportunities, &clique)?;
    Ok(MergeOutcome {
        datapath,
        compatibility,
        clique,
        clique_weight,
    })
}

/// Merge two graphs into a datapath with configurations `a` and `b`.
pub fn merge_pair(a: &DataflowGraph, b: &DataflowGraph, costs: &CostTable) -> Result<MergeOutcome, MergeError> {
    let dp = MergedDatapath::from_graph("a", a)?;
    merge_into(&dp, b, "b", costs)
}

/// Fold every named graph into one datapath, in order.
pub fn merge_many(graphs: &[(String, DataflowGraph)], costs: &CostTable) -> Result<MergedDatapath, MergeError> {
    let Some(((first_name, first), rest)) = graphs.split_first() else {
        return Err(MergeError::EmptyPatternList);
    };
    let mut dp = MergedDatapath::from_graph(first_name.clone(), first)?;
    for (name, g) in rest {
        dp = merge_into(&dp, g, name, costs)?.datapath;
    }
    Ok(dp)
}

/// Patterns worth a dedicated configuration: at least two non-constant nodes.
pub fn variant_candidates(ranked: &[MisReport]) -> Vec<&MisReport> {
    ranked
        .iter()
        .filter(|r| r.pattern.compute_nodes() >= 2)
        .collect()
}

/// Variant 1 is a single unit over the baseline ops used by the application;
/// variant `i` merges the top `i - 1` candidate patterns into it.
pub fn build_pe_variants(
    ranked: &[MisReport],
    baseline_ops: &BTreeSet<OpKind>,
    app_ops: &BTreeSet<OpKind>,
    k: usize,
    costs: &CostTable,
) -> Result<Vec<MergedDatapath>, MergeError> {
    let pruned: BTreeSet<OpKind> = baseline_ops
        .intersection(app_ops)
        .copied()
        .filter(|o| o.is_compute())
        .collect();
    if pruned.is_empty() {
        return Err(MergeError::EmptyBaseline);
    }
    let candidates = variant_candidates(ranked);
    if k > 1 && candidates.is_empty() {
        return Err(MergeError::EmptyPatternList);
    }
    let mut variants = vec![MergedDatapath::single_unit("pe", &pruned)];
    for (i, cand) in candidates.iter().take(k.saturating_sub(1)).enumerate() {
        let prev = variants.last().expect("baseline present");
        let next = merge_into(prev, &cand.pattern.graph, &format!("cand{i}"), costs)?.datapath;
        variants.push(next);
    }
    if variants.len() < k {
        log::warn!(
            "only {} candidate patterns; produced {} of {k} variants",
            candidates.len(),
            variants.len()
        );
    }
    Ok(variants)
}
