//! Canonical labeling of small dataflow graphs.
//!
//! Colour refinement over (op, port label) signatures followed by
//! individualisation of each member of the first non-trivial cell. Every leaf
//! of the search tree yields an encoding; the lexicographically smallest one is
//! the certificate. Input ports of commutative operations carry a wildcard
//! label so operand order does not distinguish graphs.

use crate::graph::{DataflowGraph, GraphError};
use serde::{Deserialize, Serialize};
use std::fmt;

const WILDCARD_PORT: u8 = u8::MAX;

/// Isomorphism-invariant byte string identifying a connected pattern.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalKey(pub Vec<u8>);

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(&self.0))
    }
}

impl Serialize for CanonicalKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(&self.0))
    }
}

impl<'de> Deserialize<'de> for CanonicalKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map(CanonicalKey).map_err(serde::de::Error::custom)
    }
}

/// A canonical key together with the node order that produced it.
///
/// `order[pos]` is the node index placed at canonical position `pos`; two
/// graphs with equal keys are mapped onto each other position by position.
#[derive(Debug, Clone)]
pub struct CanonicalForm {
    pub key: CanonicalKey,
    pub order: Vec<usize>,
}

/// Canonical key of a connected graph.
pub fn canonical_key(g: &DataflowGraph) -> Result<CanonicalKey, GraphError> {
    if !g.is_connected() {
        return Err(GraphError::Disconnected);
    }
    Ok(canonical_form(g).key)
}

/// Canonical form of any graph (connectivity not required).
pub fn canonical_form(g: &DataflowGraph) -> CanonicalForm {
    let labelled = Labelled::new(g);
    let initial = labelled.ranks(|v| (labelled.ops[v], Vec::new(), Vec::new()));
    let mut best: Option<(Vec<u8>, Vec<usize>)> = None;
    labelled.search(initial, &mut best);
    let (key, order) = best.unwrap_or_else(|| (labelled.encode(&[]), Vec::new()));
    CanonicalForm {
        key: CanonicalKey(key),
        order,
    }
}

type Sig = (u32, Vec<(u32, u8, u8)>, Vec<(u32, u8, u8)>);

struct Labelled {
    ops: Vec<u32>,
    // (src, dst, port label, src port)
    edges: Vec<(usize, usize, u8, u8)>,
    ins: Vec<Vec<usize>>,
    outs: Vec<Vec<usize>>,
}

impl Labelled {
    fn new(g: &DataflowGraph) -> Self {
        let n = g.len();
        let ops = g.nodes().iter().map(|node| node.op as u32).collect();
        let mut edges = Vec::with_capacity(g.edges().len());
        let mut ins = vec![Vec::new(); n];
        let mut outs = vec![Vec::new(); n];
        for (ei, e) in g.edges().iter().enumerate() {
            let s = g.src_index(ei);
            let d = g.dst_index(ei);
            let label = if g.op(d).is_commutative() {
                WILDCARD_PORT
            } else {
                e.dst_port as u8
            };
            outs[s].push(edges.len());
            ins[d].push(edges.len());
            edges.push((s, d, label, e.src_port as u8));
        }
        Labelled {
            ops,
            edges,
            ins,
            outs,
        }
    }

    fn n(&self) -> usize {
        self.ops.len()
    }

    fn ranks(&self, sig: impl Fn(usize) -> Sig) -> Vec<u32> {
        let sigs: Vec<Sig> = (0..self.n()).map(sig).collect();
        let mut sorted = sigs.clone();
        sorted.sort();
        sorted.dedup();
        sigs.iter()
            .map(|s| sorted.binary_search(s).expect("present") as u32)
            .collect()
    }

    fn refine(&self, mut colors: Vec<u32>) -> Vec<u32> {
        let mut classes = count_distinct(&colors);
        loop {
            let next = self.ranks(|v| {
                let mut ins: Vec<_> = self.ins[v]
                    .iter()
                    .map(|&e| {
                        let (s, _, l, sp) = self.edges[e];
                        (colors[s], l, sp)
                    })
                    .collect();
                ins.sort_unstable();
                let mut outs: Vec<_> = self.outs[v]
                    .iter()
                    .map(|&e| {
                        let (_, d, l, sp) = self.edges[e];
                        (colors[d], l, sp)
                    })
                    .collect();
                outs.sort_unstable();
                (colors[v], ins, outs)
            });
            let next_classes = count_distinct(&next);
            colors = next;
            if next_classes == classes {
                return colors;
            }
            classes = next_classes;
        }
    }

    fn search(&self, colors: Vec<u32>, best: &mut Option<(Vec<u8>, Vec<usize>)>) {
        let colors = self.refine(colors);
        let n = self.n();
        if n == 0 {
            return;
        }
        let mut sizes = vec![0usize; n];
        for &c in &colors {
            sizes[c as usize] += 1;
        }
        let Some(target) = (0..n).find(|&c| sizes[c] > 1) else {
            let mut order = vec![0usize; n];
            for (v, &c) in colors.iter().enumerate() {
                order[c as usize] = v;
            }
            let code = self.encode(&order);
            if best.as_ref().is_none_or(|(b, _)| code < *b) {
                *best = Some((code, order));
            }
            return;
        };
        let cell: Vec<usize> = (0..n).filter(|&v| colors[v] as usize == target).collect();
        for &v in &cell {
            let split = colors
                .iter()
                .enumerate()
                .map(|(u, &c)| {
                    let bump = (c as usize == target && u != v) as u32;
                    c * 2 + bump
                })
                .collect::<Vec<_>>();
            let split = self.ranks(|u| (split[u], Vec::new(), Vec::new()));
            self.search(split, best);
        }
    }

    fn encode(&self, order: &[usize]) -> Vec<u8> {
        let mut pos = vec![0u16; self.n()];
        for (p, &v) in order.iter().enumerate() {
            pos[v] = p as u16;
        }
        let mut out = Vec::with_capacity(4 + order.len() + self.edges.len() * 6);
        out.extend_from_slice(&(order.len() as u16).to_be_bytes());
        out.extend(order.iter().map(|&v| self.ops[v] as u8));
        let mut edges: Vec<(u16, u16, u8, u8)> = self
            .edges
            .iter()
            .map(|&(s, d, l, sp)| (pos[s], pos[d], l, sp))
            .collect();
        edges.sort_unstable();
        out.extend_from_slice(&(edges.len() as u16).to_be_bytes());
        for (s, d, l, sp) in edges {
            out.extend_from_slice(&s.to_be_bytes());
            out.extend_from_slice(&d.to_be_bytes());
            out.push(l);
            out.push(sp);
        }
        out
    }
}

fn count_distinct(colors: &[u32]) -> usize {
    let mut c = colors.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}
