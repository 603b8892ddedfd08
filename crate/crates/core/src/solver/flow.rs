//! Dinic max-flow for recovering node counts from group supports.

use std::collections::VecDeque;

struct Edge {
    to: usize,
    rev: usize,
    cap: usize,
}

struct Dinic {
    graph: Vec<Vec<Edge>>,
    level: Vec<Option<usize>>,
    iter: Vec<usize>,
}

impl Dinic {
    fn new(n: usize) -> Self {
        Dinic {
            graph: (0..n).map(|_| Vec::new()).collect(),
            level: vec![None; n],
            iter: vec![0; n],
        }
    }

    /// Returns the index of the forward edge in `graph[from]`.
    fn add_edge(&mut self, from: usize, to: usize, cap: usize) -> usize {
        let fwd = self.graph[from].len();
        let back = self.graph[to].len() + usize::from(from == to);
        self.graph[from].push(Edge { to, rev: back, cap });
        self.graph[to].push(Edge {
            to: from,
            rev: fwd,
            cap: 0,
        });
        fwd
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = None);
        self.level[s] = Some(0);
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            let lv = self.level[v].unwrap();
            for e in &self.graph[v] {
                if e.cap > 0 && self.level[e.to].is_none() {
                    self.level[e.to] = Some(lv + 1);
                    queue.push_back(e.to);
                }
            }
        }
        self.level[t].is_some()
    }

    fn dfs(&mut self, v: usize, t: usize, pushed: usize) -> usize {
        if v == t {
            return pushed;
        }
        while self.iter[v] < self.graph[v].len() {
            let i = self.iter[v];
            let (to, cap) = (self.graph[v][i].to, self.graph[v][i].cap);
            let deeper = match (self.level[v], self.level[to]) {
                (Some(a), Some(b)) => b == a + 1,
                _ => false,
            };
            if cap > 0 && deeper {
                let got = self.dfs(to, t, pushed.min(cap));
                if got > 0 {
                    self.graph[v][i].cap -= got;
                    let rev = self.graph[v][i].rev;
                    self.graph[to][rev].cap += got;
                    return got;
                }
            }
            self.iter[v] += 1;
        }
        0
    }

    fn run(&mut self, s: usize, t: usize) -> usize {
        let mut flow = 0;
        while self.bfs(s, t) {
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(s, t, usize::MAX);
                if f == 0 {
                    break;
                }
                flow += f;
            }
        }
        flow
    }
}

/// Routes `demand` nodes for every group through its allowed minipods
/// (`supports[i]`) without exceeding `capacities`. Returns group × minipod
/// counts, or `None` when no full assignment exists.
pub fn max_flow_assignment(
    demand: usize,
    supports: &[Vec<usize>],
    capacities: &[usize],
) -> Option<Vec<Vec<usize>>> {
    let r = supports.len();
    let k = capacities.len();
    let (source, sink) = (0, r + k + 1);
    let mut net = Dinic::new(r + k + 2);
    for i in 0..r {
        net.add_edge(source, 1 + i, demand);
    }
    let mut arcs = Vec::new();
    for (i, support) in supports.iter().enumerate() {
        for &j in support {
            let e = net.add_edge(1 + i, 1 + r + j, demand);
            arcs.push((i, j, e));
        }
    }
    for (j, &c) in capacities.iter().enumerate() {
        net.add_edge(1 + r + j, sink, c);
    }
    if net.run(source, sink) != demand * r {
        return None;
    }
    let mut counts = vec![vec![0; k]; r];
    for (i, j, e) in arcs {
        counts[i][j] += demand - net.graph[1 + i][e].cap;
    }
    Some(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn routes_full_demand() {
        let counts = max_flow_assignment(4, &[vec![0, 1], vec![1, 2]], &[3, 3, 2]).unwrap();
        for row in &counts {
            assert_eq!(row.iter().sum::<usize>(), 4);
        }
        assert_eq!(counts[0][2], 0);
        assert_eq!(counts[1][0], 0);
        for j in 0..3 {
            assert!(counts[0][j] + counts[1][j] <= [3, 3, 2][j]);
        }
    }

    #[test]
    fn reports_shortfall() {
        assert!(max_flow_assignment(4, &[vec![0], vec![0]], &[7]).is_none());
        assert!(max_flow_assignment(2, &[vec![]], &[5]).is_none());
    }
}
