//! Non-overlapping occurrence analysis.
//!
//! Each occurrence of a pattern becomes a vertex; occurrences sharing any
//! application node are adjacent. The size of an independent set of that
//! overlap graph is the number of fully utilised PEs the pattern could
//! occupy. Up to [`DEFAULT_EXACT_THRESHOLD`] vertices a maximum independent
//! set is computed; above it a minimum-degree greedy pass yields a maximal one.

use crate::canon::CanonicalKey;
use crate::iso::Embedding;
use crate::miner::{MinedPattern, Pattern};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

pub const DEFAULT_EXACT_THRESHOLD: usize = 25;

/// Simple undirected graph over occurrences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapGraph {
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
}

impl OverlapGraph {
    /// Adjacent iff the node sets intersect.
    pub fn from_sets<T: Ord>(sets: &[BTreeSet<T>]) -> Self {
        let mut edges = Vec::new();
        for i in 0..sets.len() {
            for j in i + 1..sets.len() {
                if !sets[i].is_disjoint(&sets[j]) {
                    edges.push((i, j));
                }
            }
        }
        OverlapGraph {
            vertices: sets.len(),
            edges,
        }
    }

    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        let mut adj = vec![vec![false; self.vertices]; self.vertices];
        for &(a, b) in &self.edges {
            adj[a][b] = true;
            adj[b][a] = true;
        }
        adj
    }
}

pub fn build_overlap_graph(mp: &MinedPattern) -> OverlapGraph {
    let sets: Vec<BTreeSet<&str>> = mp.embeddings.iter().map(Embedding::nodes).collect();
    OverlapGraph::from_sets(&sets)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MisMode {
    /// Maximum independent set by branch and bound.
    Exact,
    /// Maximal independent set by minimum-degree greedy selection.
    Greedy,
}

/// Independent vertex set (sorted) and the mode that produced it.
pub fn maximal_independent_set(og: &OverlapGraph, exact_threshold: usize) -> (Vec<usize>, MisMode) {
    let adj = og.adjacency();
    if og.vertices <= exact_threshold.min(64) {
        (exact_mis(&adj), MisMode::Exact)
    } else {
        (greedy_mis(&adj), MisMode::Greedy)
    }
}

fn exact_mis(adj: &[Vec<bool>]) -> Vec<usize> {
    let n = adj.len();
    let masks: Vec<u64> = adj
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, &e)| e)
                .fold(0u64, |m, (j, _)| m | (1 << j))
        })
        .collect();
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut best = (0u32, 0u64);
    // include-first on the lowest candidate visits sets in lexicographic
    // order, so keeping only strict improvements gives the smallest optimum
    fn rec(cand: u64, cur: u64, masks: &[u64], best: &mut (u32, u64)) {
        let size = cur.count_ones();
        if size > best.0 {
            *best = (size, cur);
        }
        if cand == 0 || size + cand.count_ones() <= best.0 {
            return;
        }
        let v = cand.trailing_zeros() as usize;
        let bit = 1u64 << v;
        rec(cand & !bit & !masks[v], cur | bit, masks, best);
        rec(cand & !bit, cur, masks, best);
    }
    if n > 0 {
        rec(all, 0, &masks, &mut best);
    }
    (0..n).filter(|&v| best.1 & (1 << v) != 0).collect()
}

fn greedy_mis(adj: &[Vec<bool>]) -> Vec<usize> {
    let n = adj.len();
    let mut alive = vec![true; n];
    let mut chosen = Vec::new();
    loop {
        let pick = (0..n).filter(|&v| alive[v]).min_by_key(|&v| {
            let deg = (0..n).filter(|&u| alive[u] && adj[v][u]).count();
            (deg, v)
        });
        let Some(v) = pick else { break };
        chosen.push(v);
        alive[v] = false;
        for u in 0..n {
            if adj[v][u] {
                alive[u] = false;
            }
        }
    }
    chosen.sort_unstable();
    chosen
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MisReport {
    pub pattern: Pattern,
    pub frequency: usize,
    pub embeddings: Vec<Embedding>,
    pub mis_size: usize,
    pub chosen_embeddings: Vec<Embedding>,
    pub mis_mode: MisMode,
}

impl MisReport {
    pub fn key(&self) -> &CanonicalKey {
        &self.pattern.canonical_key
    }
}

pub fn analyze(mp: &MinedPattern, exact_threshold: usize) -> MisReport {
    let og = build_overlap_graph(mp);
    let (chosen, mode) = maximal_independent_set(&og, exact_threshold);
    MisReport {
        pattern: mp.pattern.clone(),
        frequency: mp.frequency,
        embeddings: mp.embeddings.clone(),
        mis_size: chosen.len(),
        chosen_embeddings: chosen.iter().map(|&i| mp.embeddings[i].clone()).collect(),
        mis_mode: mode,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MisError {
    #[error("no patterns to rank")]
    EmptyInput,
}

/// Order by MIS size descending, then pattern size descending, then key.
pub fn rank_patterns(mut reports: Vec<MisReport>) -> Result<Vec<MisReport>, MisError> {
    if reports.is_empty() {
        return Err(MisError::EmptyInput);
    }
    reports.sort_by(|a, b| {
        b.mis_size
            .cmp(&a.mis_size)
            .then_with(|| b.pattern.node_count().cmp(&a.pattern.node_count()))
            .then_with(|| a.key().cmp(b.key()))
    });
    Ok(reports)
}
