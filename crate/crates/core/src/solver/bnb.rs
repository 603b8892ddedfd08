//! Branch and bound over `(Σy, T)`.
//!
//! Groups are interchangeable, so a solution is determined by which minipods
//! are used and how each group's nodes split across them. Candidates
//! `(Y, T)` are visited in objective order; the first feasible one is
//! optimal. Feasibility of a minipod subset with support bound `T` depends
//! only on the subset's capacities and is monotone in them, so among all
//! subsets of size `Y` it suffices to test the `Y` largest (ties by id).
//!
//! A subset is checked with cheap constructive tests first. When those are
//! inconclusive an exact search enumerates multisets of group supports and
//! keeps Hall's condition (`g·#{i : supp_i ⊆ U} ≤ cap(U)` for every minipod
//! set `U`) satisfied; a max-flow then recovers the node counts.

use std::cmp::Reverse;
use std::time::{Duration, Instant};

use super::flow::max_flow_assignment;
use super::{MipInstance, MipSolution, SolveStats, SolveStatus, SolverConfig, SolverError};

/// Largest subset handled by the exact search (its Hall table has `2^Y` entries).
const EXACT_MAX_MINIPODS: usize = 16;

enum Feas {
    /// Node counts, group × subset position.
    Yes(Vec<Vec<usize>>),
    No,
    /// Search budget ran out before a decision.
    Unknown,
}

struct Budget {
    start: Instant,
    limit: Duration,
    node_limit: Option<u64>,
    nodes: u64,
    exhausted: bool,
}

impl Budget {
    fn tick(&mut self) -> bool {
        self.nodes += 1;
        if self.node_limit.is_some_and(|l| self.nodes > l) {
            self.exhausted = true;
        }
        if self.nodes.is_multiple_of(1024) && self.start.elapsed() > self.limit {
            self.exhausted = true;
        }
        !self.exhausted
    }
}

pub fn solve(inst: &MipInstance, cfg: &SolverConfig) -> Result<MipSolution, SolverError> {
    inst.validate()?;
    cfg.validate()?;
    inst.check_capacity()?;
    let start = Instant::now();
    let (r, g, need) = (inst.group_count, inst.group_size, inst.demand());

    let mut by_capacity: Vec<usize> = (0..inst.minipod_count())
        .filter(|&j| inst.available[j] > 0)
        .collect();
    by_capacity.sort_by_key(|&j| (Reverse(inst.available[j]), j));

    // Lower bound on Y: fewest minipods whose capacity covers the demand.
    let mut acc = 0;
    let y_min = by_capacity
        .iter()
        .position(|&j| {
            acc += inst.available[j];
            acc >= need
        })
        .expect("capacity precheck passed")
        + 1;

    let mut candidates: Vec<(i64, usize, usize)> = (y_min..=by_capacity.len())
        .flat_map(|y| (1..=y.min(g)).map(move |t| (y, t)))
        .map(|(y, t)| ((inst.objective(y, t) * 1e9).round() as i64, t, y))
        .collect();
    candidates.sort_unstable();

    let mut budget = Budget {
        start,
        limit: cfg.time_limit(),
        node_limit: cfg.node_limit,
        nodes: 0,
        exhausted: false,
    };
    let mut by_id = by_capacity.clone();
    by_id.sort_unstable();

    let mut stats = SolveStats::default();
    let mut uncertain = false;
    for &(_, t, y) in &candidates {
        stats.candidates_checked += 1;
        let found = if cfg.symmetry_breaking {
            let subset = &by_capacity[..y];
            match check_subset(inst, subset, t, &mut budget) {
                Feas::Yes(c) => Some((subset.to_vec(), c)),
                Feas::No => None,
                Feas::Unknown => {
                    uncertain = true;
                    None
                }
            }
        } else {
            let mut hit = None;
            for subset in combinations(&by_id, y) {
                match check_subset(inst, &subset, t, &mut budget) {
                    Feas::Yes(c) => {
                        hit = Some((subset, c));
                        break;
                    }
                    Feas::No => {}
                    Feas::Unknown => uncertain = true,
                }
            }
            hit
        };
        if let Some((subset, local)) = found {
            let mut counts = vec![vec![0; inst.minipod_count()]; r];
            for (i, row) in local.iter().enumerate() {
                for (pos, &n) in row.iter().enumerate() {
                    counts[i][subset[pos]] = n;
                }
            }
            stats.nodes_explored = budget.nodes;
            stats.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
            let status = if uncertain {
                SolveStatus::FeasibleTimeLimit
            } else {
                SolveStatus::Optimal
            };
            return Ok(MipSolution::from_counts(inst, &counts, status, stats));
        }
    }
    unreachable!("using every minipod with T = min(Y, group_size) is always feasible")
}

fn combinations(items: &[usize], k: usize) -> impl Iterator<Item = Vec<usize>> + '_ {
    let n = items.len();
    let mut idx: Vec<usize> = (0..k).collect();
    let mut done = k > n;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let out = idx.iter().map(|&i| items[i]).collect();
        // Advance to the next index tuple in lexicographic order.
        match (0..k).rev().find(|&i| idx[i] != i + n - k) {
            Some(i) => {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
            }
            None => done = true,
        }
        Some(out)
    })
}

fn check_subset(inst: &MipInstance, subset: &[usize], t: usize, budget: &mut Budget) -> Feas {
    let caps: Vec<usize> = subset.iter().map(|&j| inst.available[j]).collect();
    feasible(&caps, t, inst.group_count, inst.group_size, budget)
}

/// Can `r` groups of `g` nodes be placed on minipods with capacities `caps`
/// with at most `t` minipods per group?
fn feasible(caps: &[usize], t: usize, r: usize, g: usize, budget: &mut Budget) -> Feas {
    let y = caps.len();
    if caps.iter().sum::<usize>() < r * g {
        return Feas::No;
    }
    let mut desc: Vec<usize> = (0..y).collect();
    desc.sort_by_key(|&j| (Reverse(caps[j]), j));

    // A group never touches more than min(y, g) minipods.
    if t >= y.min(g) {
        let (counts, _) = sequential_fill(caps, &desc, r, g);
        return Feas::Yes(counts);
    }
    if desc[..t].iter().map(|&j| caps[j]).sum::<usize>() < g {
        return Feas::No;
    }
    if t == 1 {
        return whole_groups(caps, &desc, r, g).map_or(Feas::No, Feas::Yes);
    }
    let (counts, widest) = sequential_fill(caps, &desc, r, g);
    if widest <= t {
        return Feas::Yes(counts);
    }
    if let Some(counts) = best_fit_pieces(caps, t, r, g) {
        return Feas::Yes(counts);
    }
    if y > EXACT_MAX_MINIPODS {
        return Feas::Unknown;
    }
    exact(caps, t, r, g, budget)
}

/// Fill groups in order across minipods in `order`. Returns counts and the
/// largest number of minipods any group touched.
fn sequential_fill(
    caps: &[usize],
    order: &[usize],
    r: usize,
    g: usize,
) -> (Vec<Vec<usize>>, usize) {
    let mut counts = vec![vec![0; caps.len()]; r];
    let mut left: Vec<usize> = caps.to_vec();
    let mut cursor = 0;
    let mut widest = 0;
    for row in counts.iter_mut() {
        let mut need = g;
        let mut touched = 0;
        while need > 0 {
            let j = order[cursor];
            let take = need.min(left[j]);
            if take > 0 {
                row[j] += take;
                left[j] -= take;
                need -= take;
                touched += 1;
            }
            if left[j] == 0 {
                cursor += 1;
            }
        }
        widest = widest.max(touched);
    }
    (counts, widest)
}

fn whole_groups(caps: &[usize], order: &[usize], r: usize, g: usize) -> Option<Vec<Vec<usize>>> {
    let mut counts = vec![vec![0; caps.len()]; r];
    let mut i = 0;
    for &j in order {
        for _ in 0..caps[j] / g {
            if i == r {
                return Some(counts);
            }
            counts[i][j] = g;
            i += 1;
        }
    }
    (i == r).then_some(counts)
}

/// Per group: take whole minipods largest-first until the remainder fits in
/// one minipod, then close with the tightest minipod that holds it.
fn best_fit_pieces(caps: &[usize], t: usize, r: usize, g: usize) -> Option<Vec<Vec<usize>>> {
    let mut left = caps.to_vec();
    let mut counts = vec![vec![0; caps.len()]; r];
    for row in counts.iter_mut() {
        let mut need = g;
        for piece in 0..t {
            let closing = (0..left.len())
                .filter(|&j| row[j] == 0 && left[j] >= need)
                .min_by_key(|&j| (left[j], j));
            if let Some(j) = closing {
                row[j] = need;
                left[j] -= need;
                need = 0;
                break;
            }
            if piece + 1 == t {
                break;
            }
            let j = (0..left.len())
                .filter(|&j| row[j] == 0 && left[j] > 0)
                .max_by_key(|&j| (left[j], Reverse(j)))?;
            row[j] = left[j];
            need -= left[j];
            left[j] = 0;
        }
        if need > 0 {
            return None;
        }
    }
    Some(counts)
}

enum Outcome {
    Found,
    Exhausted,
    Aborted,
}

struct Exact<'a> {
    cap_of: Vec<usize>,
    supports: Vec<usize>,
    cnt: Vec<usize>,
    chosen: Vec<usize>,
    g: usize,
    full: usize,
    budget: &'a mut Budget,
}

impl Exact<'_> {
    fn supersets(&self, m: usize) -> impl Iterator<Item = usize> {
        let comp = self.full & !m;
        let mut sub = Some(comp);
        std::iter::from_fn(move || {
            let s = sub?;
            sub = (s != 0).then(|| (s - 1) & comp);
            Some(m | s)
        })
    }

    fn dfs(&mut self, from: usize, remaining: usize) -> Outcome {
        if remaining == 0 {
            return Outcome::Found;
        }
        for idx in from..self.supports.len() {
            if !self.budget.tick() {
                return Outcome::Aborted;
            }
            let m = self.supports[idx];
            let fits = self
                .supersets(m)
                .all(|u| self.g * (self.cnt[u] + 1) <= self.cap_of[u]);
            if !fits {
                continue;
            }
            for u in self.supersets(m).collect::<Vec<_>>() {
                self.cnt[u] += 1;
            }
            self.chosen.push(m);
            match self.dfs(idx, remaining - 1) {
                Outcome::Exhausted => {}
                done => return done,
            }
            self.chosen.pop();
            for u in self.supersets(m).collect::<Vec<_>>() {
                self.cnt[u] -= 1;
            }
        }
        Outcome::Exhausted
    }
}

fn exact(caps: &[usize], t: usize, r: usize, g: usize, budget: &mut Budget) -> Feas {
    let y = caps.len();
    let n = 1usize << y;
    let cap_of: Vec<usize> = (0..n)
        .map(|u| (0..y).filter(|&j| u >> j & 1 == 1).map(|j| caps[j]).sum())
        .collect();
    let mut supports: Vec<usize> = (1..n)
        .filter(|&m| (m.count_ones() as usize) <= t && cap_of[m] >= g)
        .collect();
    supports.sort_by_key(|&m| (m.count_ones(), Reverse(cap_of[m]), m));

    let mut search = Exact {
        cap_of,
        supports,
        cnt: vec![0; n],
        chosen: Vec::with_capacity(r),
        g,
        full: n - 1,
        budget,
    };
    match search.dfs(0, r) {
        Outcome::Found => {
            let supports: Vec<Vec<usize>> = search
                .chosen
                .iter()
                .map(|&m| (0..y).filter(|&j| m >> j & 1 == 1).collect())
                .collect();
            let counts = max_flow_assignment(g, &supports, caps)
                .expect("Hall's condition guarantees a full flow");
            Feas::Yes(counts)
        }
        Outcome::Exhausted => Feas::No,
        Outcome::Aborted => Feas::Unknown,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget() -> Budget {
        Budget {
            start: Instant::now(),
            limit: Duration::from_secs(10),
            node_limit: None,
            nodes: 0,
            exhausted: false,
        }
    }

    fn feasible_counts(caps: &[usize], t: usize, r: usize, g: usize) -> Option<Vec<Vec<usize>>> {
        match feasible(caps, t, r, g, &mut budget()) {
            Feas::Yes(c) => Some(c),
            Feas::No => None,
            Feas::Unknown => panic!("budget exhausted"),
        }
    }

    fn check(counts: &[Vec<usize>], caps: &[usize], t: usize, g: usize) {
        for row in counts {
            assert_eq!(row.iter().sum::<usize>(), g);
            assert!(row.iter().filter(|&&n| n > 0).count() <= t);
        }
        for (j, &c) in caps.iter().enumerate() {
            assert!(counts.iter().map(|row| row[j]).sum::<usize>() <= c);
        }
    }

    #[test]
    fn sequential_fill_fails_where_pairing_works() {
        // Sorted fill splits the second group three ways; {3,1} + {2,2} fits.
        let caps = [2, 2, 3, 1];
        let (_, widest) = sequential_fill(&caps, &[2, 0, 1, 3], 2, 4);
        assert_eq!(widest, 3);
        let counts = feasible_counts(&caps, 2, 2, 4).unwrap();
        check(&counts, &caps, 2, 4);
    }

    #[test]
    fn exact_search_proves_infeasibility() {
        // Every pair sums to at most 4 but groups need 5.
        assert!(feasible_counts(&[2, 2, 2, 2, 2], 2, 2, 5).is_none());
        assert!(matches!(
            exact(&[2, 2, 2, 2, 2], 2, 2, 5, &mut budget()),
            Feas::No
        ));
        let counts = feasible_counts(&[2, 2, 2, 2, 2], 2, 3, 3).unwrap();
        check(&counts, &[2, 2, 2, 2, 2], 2, 3);
    }

    #[test]
    fn exact_agrees_with_fast_paths() {
        // Whenever a fast path says yes, the exact search must too.
        let cases: &[(&[usize], usize, usize, usize)] = &[
            (&[3, 3, 3], 1, 3, 3),
            (&[4, 1, 1], 2, 2, 3),
            (&[5, 3, 2, 2], 2, 3, 4),
            (&[1, 1, 1, 1], 3, 1, 3),
        ];
        for &(caps, t, r, g) in cases {
            let fast = feasible_counts(caps, t, r, g).is_some();
            let slow = matches!(exact(caps, t, r, g, &mut budget()), Feas::Yes(_));
            assert_eq!(fast, slow, "{caps:?} t={t} r={r} g={g}");
        }
    }

    #[test]
    fn combinations_are_lexicographic() {
        let got: Vec<_> = combinations(&[1, 3, 5, 7], 2).collect();
        assert_eq!(
            got,
            vec![
                vec![1, 3],
                vec![1, 5],
                vec![1, 7],
                vec![3, 5],
                vec![3, 7],
                vec![5, 7]
            ]
        );
        assert_eq!(combinations(&[1, 2], 3).count(), 0);
        assert_eq!(combinations(&[1, 2], 0).count(), 1);
    }

    #[test]
    fn node_limit_degrades_to_time_limit_status() {
        // Find a small instance whose decision needs the exact search.
        let mut found = None;
        'outer: for y in 3..=5usize {
            for mask in 0..4usize.pow(y as u32) {
                let caps: Vec<usize> = (0..y)
                    .map(|j| 1 + mask / 4usize.pow(j as u32) % 4)
                    .collect();
                for g in 2..=6 {
                    for r in 1..=4 {
                        let mut b = budget();
                        let _ = feasible(&caps, 2, r, g, &mut b);
                        if b.nodes > 0 {
                            found = Some((caps.clone(), r, g));
                            break 'outer;
                        }
                    }
                }
            }
        }
        let (caps, r, g) = found.expect("some instance reaches the exact search");
        let inst = MipInstance {
            group_count: r,
            group_size: g,
            available: caps,
            alpha: 0.0,
            beta: 1.0,
            unit: super::super::SchedulingUnit::Row,
        };
        let full = solve(&inst, &SolverConfig::default()).unwrap();
        assert_eq!(full.status, SolveStatus::Optimal);
        let cfg = SolverConfig {
            node_limit: Some(0),
            ..SolverConfig::default()
        };
        let limited = solve(&inst, &cfg).unwrap();
        assert_eq!(limited.status, SolveStatus::FeasibleTimeLimit);
        assert!(limited.objective >= full.objective);
    }
}
