//! Induced subgraph matching of patterns inside application graphs.

use crate::graph::DataflowGraph;
use crate::op::OpKind;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

/// An occurrence of a pattern: pattern node id -> application node id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Embedding {
    pub node_map: BTreeMap<String, String>,
}

impl Embedding {
    /// Application node ids covered by this occurrence.
    pub fn nodes(&self) -> BTreeSet<&str> {
        self.node_map.values().map(String::as_str).collect()
    }

    pub fn overlaps(&self, other: &Embedding) -> bool {
        let mine = self.nodes();
        other.node_map.values().any(|v| mine.contains(v.as_str()))
    }
}

type PairLabels = HashMap<(usize, usize), Vec<(u8, usize)>>;

fn pair_labels(g: &DataflowGraph) -> PairLabels {
    let mut m: PairLabels = HashMap::new();
    for (ei, e) in g.edges().iter().enumerate() {
        let s = g.src_index(ei);
        let d = g.dst_index(ei);
        let label = if g.op(d).is_commutative() {
            u8::MAX
        } else {
            e.dst_port as u8
        };
        m.entry((s, d)).or_default().push((label, e.src_port));
    }
    for v in m.values_mut() {
        v.sort_unstable();
    }
    m
}

/// Match order: breadth-first over undirected adjacency, components in node order.
fn match_order(p: &DataflowGraph) -> Vec<(usize, Option<usize>)> {
    let mut order = Vec::with_capacity(p.len());
    let mut seen = vec![false; p.len()];
    for root in 0..p.len() {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        order.push((root, None));
        let mut head = order.len() - 1;
        while head < order.len() {
            let (v, _) = order[head];
            head += 1;
            for w in p.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    order.push((w, Some(v)));
                }
            }
        }
    }
    order
}

/// All induced occurrences of `pattern` in `g`, one per distinct node set.
///
/// Operations must match exactly; ports must match except on commutative
/// destinations. Memory nodes are never matched. Results are sorted by the
/// sorted list of covered application node ids.
pub fn find_embeddings(pattern: &DataflowGraph, g: &DataflowGraph) -> Vec<Embedding> {
    if pattern.is_empty() || pattern.nodes().iter().any(|n| n.op == OpKind::Mem) {
        return Vec::new();
    }
    let order = match_order(pattern);
    let plabels = pair_labels(pattern);
    let glabels = pair_labels(g);
    let mut state = Search {
        pattern,
        g,
        order: &order,
        plabels: &plabels,
        glabels: &glabels,
        image: vec![usize::MAX; pattern.len()],
        used: vec![false; g.len()],
        seen_sets: HashSet::new(),
        found: Vec::new(),
    };
    state.extend(0);
    let mut found = state.found;
    found.sort_by(|a, b| sorted_ids(a).cmp(&sorted_ids(b)));
    found
}

fn sorted_ids(e: &Embedding) -> Vec<&str> {
    e.nodes().into_iter().collect()
}

struct Search<'a> {
    pattern: &'a DataflowGraph,
    g: &'a DataflowGraph,
    order: &'a [(usize, Option<usize>)],
    plabels: &'a PairLabels,
    glabels: &'a PairLabels,
    image: Vec<usize>,
    used: Vec<bool>,
    seen_sets: HashSet<Vec<usize>>,
    found: Vec<Embedding>,
}

impl Search<'_> {
    fn extend(&mut self, depth: usize) {
        if depth == self.order.len() {
            let mut set = self.image.clone();
            set.sort_unstable();
            if self.seen_sets.insert(set) {
                let node_map = (0..self.pattern.len())
                    .map(|p| {
                        (
                            self.pattern.nodes()[p].id.clone(),
                            self.g.nodes()[self.image[p]].id.clone(),
                        )
                    })
                    .collect();
                self.found.push(Embedding { node_map });
            }
            return;
        }
        let (p, anchor) = self.order[depth];
        let candidates: Vec<usize> = match anchor {
            Some(q) => self.g.neighbors(self.image[q]).into_iter().collect(),
            None => (0..self.g.len()).collect(),
        };
        let op = self.pattern.op(p);
        for c in candidates {
            if self.used[c] || self.g.op(c) != op || self.g.op(c) == OpKind::Mem {
                continue;
            }
            if !self.consistent(p, c, depth) {
                continue;
            }
            self.image[p] = c;
            self.used[c] = true;
            self.extend(depth + 1);
            self.used[c] = false;
            self.image[p] = usize::MAX;
        }
    }

    fn consistent(&self, p: usize, c: usize, depth: usize) -> bool {
        let empty = Vec::new();
        for &(q, _) in &self.order[..depth] {
            let d = self.image[q];
            for (pa, pb, ga, gb) in [(p, q, c, d), (q, p, d, c)] {
                let pl = self.plabels.get(&(pa, pb)).unwrap_or(&empty);
                let gl = self.glabels.get(&(ga, gb)).unwrap_or(&empty);
                if pl != gl {
                    return false;
                }
            }
        }
        true
    }
}

/// For every input port of every pattern node, the application port it occupies.
///
/// Driven pattern ports pair with the application port driven by the image of
/// the same source; on commutative nodes the remaining (external) ports pair
/// up in ascending order.
pub fn port_correspondence(
    pattern: &DataflowGraph,
    g: &DataflowGraph,
    emb: &Embedding,
) -> BTreeMap<(String, usize), usize> {
    let mut out = BTreeMap::new();
    for (pi, pn) in pattern.nodes().iter().enumerate() {
        let gi = g
            .index_of(&emb.node_map[&pn.id])
            .expect("embedding targets existing nodes");
        let arity = pn.op.arity();
        if !pn.op.is_commutative() {
            for port in 0..arity {
                out.insert((pn.id.clone(), port), port);
            }
            continue;
        }
        let mut taken = vec![false; arity];
        let mut pending = Vec::new();
        for port in 0..arity {
            match pattern.driver(pi, port) {
                Some(pe) => {
                    let src_img = &emb.node_map[&pattern.edges()[pe].src];
                    let src_port = pattern.edges()[pe].src_port;
                    let gport = (0..arity).find(|&gp| {
                        !taken[gp]
                            && g.driver(gi, gp).is_some_and(|ge| {
                                let e = &g.edges()[ge];
                                &e.src == src_img && e.src_port == src_port
                            })
                    });
                    let gport = gport.expect("embedding preserves edges");
                    taken[gport] = true;
                    out.insert((pn.id.clone(), port), gport);
                }
                None => pending.push(port),
            }
        }
        let mut free = (0..arity).filter(|&gp| !taken[gp]);
        for port in pending {
            let gp = free.next().expect("arity preserved");
            out.insert((pn.id.clone(), port), gp);
        }
    }
    out
}
