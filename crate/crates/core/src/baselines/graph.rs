//! Job graph and Fiduccia–Mattheyses bipartitioning.

use std::collections::{BTreeMap, BTreeSet};

use super::BaselineError;
use crate::workload::CommMatrix;

/// Passes stop early once one brings no gain; this only bounds pathological
/// inputs.
const MAX_PASSES: usize = 100;

/// Weighted undirected graph over matrix cells (row-major vertex ids).
#[derive(Clone, Debug, PartialEq)]
pub struct JobGraph {
    adj: Vec<Vec<(usize, f64)>>,
}

impl JobGraph {
    /// PP edges join row neighbours with the per-step activation traffic
    /// (`v_p` times the micro-batch count); DP edges form a ring down each
    /// column weighted `v_d`.
    pub fn from_matrix(matrix: &CommMatrix) -> Self {
        let (rows, cols) = (matrix.rows, matrix.cols);
        let id = |r: usize, c: usize| r * cols + c;
        let pp = positive(matrix.volume.pp_bytes * matrix.microbatches as f64);
        let dp = positive(matrix.volume.dp_bytes);
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols.saturating_sub(1) {
                edges.push((id(r, c), id(r, c + 1), pp));
            }
        }
        for c in 0..cols {
            for r in 0..rows.saturating_sub(1) {
                edges.push((id(r, c), id(r + 1, c), dp));
            }
            if rows > 2 {
                edges.push((id(rows - 1, c), id(0, c), dp));
            }
        }
        Self::from_edges(rows * cols, &edges)
    }

    /// Parallel edges are merged by summing weights; self loops are dropped.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(u, v, w) in edges {
            if u != v {
                *merged.entry((u.min(v), u.max(v))).or_default() += w;
            }
        }
        let mut adj = vec![Vec::new(); n];
        for ((u, v), w) in merged {
            adj[u].push((v, w));
            adj[v].push((u, w));
        }
        JobGraph { adj }
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adj[v]
    }

    /// Each edge once, as `(u, v, w)` with `u < v`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, nb)| {
                nb.iter()
                    .filter(move |&&(v, _)| u < v)
                    .map(move |&(v, w)| (u, v, w))
            })
            .collect()
    }

    /// Induced subgraph; vertex `i` of the result is `vertices[i]`.
    pub fn subgraph(&self, vertices: &[usize]) -> JobGraph {
        let mut local = vec![usize::MAX; self.adj.len()];
        for (i, &v) in vertices.iter().enumerate() {
            local[v] = i;
        }
        let adj = vertices
            .iter()
            .map(|&v| {
                self.adj[v]
                    .iter()
                    .filter(|&&(u, _)| local[u] != usize::MAX)
                    .map(|&(u, w)| (local[u], w))
                    .collect()
            })
            .collect();
        JobGraph { adj }
    }

    pub fn cut_weight(&self, side: &[bool]) -> f64 {
        self.edges()
            .into_iter()
            .filter(|&(u, v, _)| side[u] != side[v])
            .map(|(_, _, w)| w)
            .sum()
    }

    pub fn is_connected(&self) -> bool {
        let n = self.adj.len();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(u, _) in &self.adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

fn positive(w: f64) -> f64 {
    if w > 0.0 {
        w
    } else {
        1e-9
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bipartition {
    /// `true` for part A.
    pub side: Vec<bool>,
    pub part_a: Vec<usize>,
    pub part_b: Vec<usize>,
    pub cut: f64,
}

impl Bipartition {
    fn from_side(graph: &JobGraph, side: Vec<bool>) -> Self {
        let part_a = (0..side.len()).filter(|&v| side[v]).collect();
        let part_b = (0..side.len()).filter(|&v| !side[v]).collect();
        Bipartition {
            cut: graph.cut_weight(&side),
            side,
            part_a,
            part_b,
        }
    }
}

/// Balanced min-cut: each part holds between `(0.5 - balance)·n` and
/// `(0.5 + balance)·n` vertices (and at least one).
pub fn fm_bipartition(graph: &JobGraph, balance: f64) -> Result<Bipartition, BaselineError> {
    let n = graph.vertex_count();
    if n < 2 {
        return Err(BaselineError::GraphTooSmall(n));
    }
    if !(balance > 0.0 && balance <= 0.5) {
        return Err(BaselineError::Balance(balance));
    }
    let mut lo = ((n as f64 * (0.5 - balance)).ceil() as usize).max(1);
    let mut hi = ((n as f64 * (0.5 + balance)).floor() as usize).min(n - 1);
    if lo > hi {
        lo = n / 2;
        hi = n / 2;
    }
    Ok(fm_partition(graph, (n / 2).clamp(lo, hi), lo, hi))
}

/// FM refinement with part A's size kept within `lo..=hi` at every accepted
/// prefix (moves may step one vertex outside the window mid-pass). Starts
/// from even-index vertices in A, trimmed or padded by index to `target`.
pub fn fm_partition(graph: &JobGraph, target: usize, lo: usize, hi: usize) -> Bipartition {
    let n = graph.vertex_count();
    assert!(lo <= target && target <= hi && hi <= n, "bad FM window");
    let mut side: Vec<bool> = (0..n).map(|v| v % 2 == 0).collect();
    let mut size_a = side.iter().filter(|&&a| a).count();
    for v in (0..n).rev() {
        if size_a <= target {
            break;
        }
        if side[v] {
            side[v] = false;
            size_a -= 1;
        }
    }
    for in_a in side.iter_mut() {
        if size_a >= target {
            break;
        }
        if !*in_a {
            *in_a = true;
            size_a += 1;
        }
    }

    let max_w = graph.edges().iter().map(|e| e.2).fold(0.0f64, f64::max);
    let scale = if max_w > 0.0 { 1e6 / max_w } else { 1.0 };
    let adj: Vec<Vec<(usize, i64)>> = (0..n)
        .map(|v| {
            graph
                .neighbors(v)
                .iter()
                .map(|&(u, w)| (u, ((w * scale).round() as i64).max(1)))
                .collect()
        })
        .collect();

    for _ in 0..MAX_PASSES {
        if !fm_pass(&adj, &mut side, lo, hi) {
            break;
        }
    }
    Bipartition::from_side(graph, side)
}

fn fm_pass(adj: &[Vec<(usize, i64)>], side: &mut [bool], lo: usize, hi: usize) -> bool {
    let n = side.len();
    let mut gain: Vec<i64> = (0..n)
        .map(|v| {
            adj[v]
                .iter()
                .map(|&(u, w)| if side[u] != side[v] { w } else { -w })
                .sum()
        })
        .collect();
    // buckets[0] holds B-side vertices, buckets[1] A-side.
    let mut buckets: [BTreeMap<i64, BTreeSet<usize>>; 2] = [BTreeMap::new(), BTreeMap::new()];
    for v in 0..n {
        buckets[side[v] as usize]
            .entry(gain[v])
            .or_default()
            .insert(v);
    }
    let mut locked = vec![false; n];
    let mut size_a = side.iter().filter(|&&a| a).count();
    let mut moves = Vec::new();
    let (mut cum, mut best_cum, mut best_len) = (0i64, 0i64, 0usize);

    loop {
        let top = |b: &BTreeMap<i64, BTreeSet<usize>>| {
            b.iter()
                .next_back()
                .map(|(&g, set)| (g, *set.iter().next().expect("buckets hold no empty sets")))
        };
        let from_a = (size_a + 1 > lo && size_a > 0)
            .then(|| top(&buckets[1]))
            .flatten();
        let from_b = (size_a < hi + 1 && size_a < n)
            .then(|| top(&buckets[0]))
            .flatten();
        let pick = match (from_a, from_b) {
            (Some(a), Some(b)) => {
                if (a.0, std::cmp::Reverse(a.1)) >= (b.0, std::cmp::Reverse(b.1)) {
                    a
                } else {
                    b
                }
            }
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => break,
        };
        let (g, v) = pick;
        let s = side[v] as usize;
        remove(&mut buckets[s], g, v);
        locked[v] = true;
        side[v] = !side[v];
        if side[v] {
            size_a += 1;
        } else {
            size_a -= 1;
        }
        cum += g;
        moves.push(v);
        for &(u, w) in &adj[v] {
            if locked[u] {
                continue;
            }
            let su = side[u] as usize;
            remove(&mut buckets[su], gain[u], u);
            gain[u] += if side[u] == side[v] { -2 * w } else { 2 * w };
            buckets[su].entry(gain[u]).or_default().insert(u);
        }
        if (lo..=hi).contains(&size_a) && cum > best_cum {
            best_cum = cum;
            best_len = moves.len();
        }
    }
    for &v in moves[best_len..].iter() {
        side[v] = !side[v];
    }
    best_cum > 0
}

fn remove(bucket: &mut BTreeMap<i64, BTreeSet<usize>>, g: i64, v: usize) {
    if let Some(set) = bucket.get_mut(&g) {
        set.remove(&v);
        if set.is_empty() {
            bucket.remove(&g);
        }
    }
}
