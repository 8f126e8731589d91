//! Maximum-weight clique by branch and bound.
//!
//! The bound is a greedy colouring of the candidate set: vertices of one
//! colour class are pairwise non-adjacent, so at most one of them joins the
//! clique and the class contributes only its heaviest weight.

/// Returns the sorted vertex set of a maximum-weight clique and its weight.
///
/// Weights must be non-negative. Among optima the lexicographically smallest
/// vertex list is returned.
pub fn max_weight_clique(weights: &[f64], adj: &[Vec<bool>]) -> (Vec<usize>, f64) {
    let n = weights.len();
    assert_eq!(adj.len(), n, "adjacency size mismatch");
    let mut s = Search {
        weights,
        adj,
        best: Vec::new(),
        best_weight: 0.0,
        current: Vec::new(),
    };
    s.expand((0..n).collect(), 0.0);
    (s.best, s.best_weight)
}

const EPS: f64 = 1e-9;

struct Search<'a> {
    weights: &'a [f64],
    adj: &'a [Vec<bool>],
    best: Vec<usize>,
    best_weight: f64,
    current: Vec<usize>,
}

impl Search<'_> {
    fn bound(&self, cand: &[usize]) -> f64 {
        let mut classes: Vec<(Vec<usize>, f64)> = Vec::new();
        for &v in cand {
            let w = self.weights[v];
            match classes
                .iter_mut()
                .find(|(members, _)| members.iter().all(|&u| !self.adj[u][v]))
            {
                Some((members, max)) => {
                    members.push(v);
                    *max = max.max(w);
                }
                None => classes.push((vec![v], w)),
            }
        }
        classes.iter().map(|(_, m)| m).sum()
    }

    fn expand(&mut self, cand: Vec<usize>, weight: f64) {
        if weight > self.best_weight + EPS {
            self.best_weight = weight;
            self.best = self.current.clone();
        }
        if cand.is_empty() || weight + self.bound(&cand) <= self.best_weight + EPS {
            return;
        }
        // lowest vertex first, include before exclude
        let v = cand[0];
        let rest = &cand[1..];
        let with: Vec<usize> = rest.iter().copied().filter(|&u| self.adj[v][u]).collect();
        self.current.push(v);
        self.expand(with, weight + self.weights[v]);
        self.current.pop();
        self.expand(rest.to_vec(), weight);
    }
}
