//! Exhaustive search over cell → minipod assignments.
//!
//! Cells are assigned row-major with branch and bound on a monotone cost.
//! Only one representative per symmetry orbit is visited: rows are kept in
//! lexicographic order, columns likewise, and among minipods of equal
//! capacity a higher id may only appear after every lower one has. All three
//! hold at once for the lexicographically smallest member of each orbit, so
//! no optimum is lost.

use std::cmp::Ordering;

use super::{check_capacity, place_cells, BaselineError};
use crate::metrics::{check_weights, spread_of_count, Placement};
use crate::solver::{NodePool, SchedulingUnit};
use crate::topology::{AllocationState, ClusterTopology};
use crate::workload::CommMatrix;

/// Raw search-space size (`minipods^cells`) above which enumeration refuses.
pub const DEFAULT_ENUMERATION_CAP: f64 = 5e6;

#[derive(Clone, Debug, PartialEq)]
pub struct EnumerationConfig {
    /// Grouping used for the MIP-style objective.
    pub unit: SchedulingUnit,
    /// `None` removes the guard.
    pub cap: Option<f64>,
}

impl Default for EnumerationConfig {
    fn default() -> Self {
        EnumerationConfig {
            unit: SchedulingUnit::Row,
            cap: Some(DEFAULT_ENUMERATION_CAP),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Enumerated {
    /// A placement minimizing the weighted max-spread score.
    pub placement: Placement,
    pub score: f64,
    /// Minimum of `w_y·(minipods used) + w_t·(largest group support)`, the
    /// quantity the MIP optimizes.
    pub objective: f64,
    pub nodes_explored: u64,
}

/// `minipods^cells` over minipods with at least one usable node.
pub fn search_space(cells: usize, minipods: usize) -> f64 {
    (minipods as f64).powi(cells as i32)
}

pub fn enumerate_optimal(
    matrix: &CommMatrix,
    topo: &ClusterTopology,
    state: &AllocationState,
    alpha: f64,
    beta: f64,
) -> Result<Enumerated, BaselineError> {
    enumerate_optimal_with(
        matrix,
        topo,
        state,
        alpha,
        beta,
        &EnumerationConfig::default(),
    )
}

pub fn enumerate_optimal_with(
    matrix: &CommMatrix,
    topo: &ClusterTopology,
    state: &AllocationState,
    alpha: f64,
    beta: f64,
    config: &EnumerationConfig,
) -> Result<Enumerated, BaselineError> {
    check_weights(alpha, beta)?;
    let pool = NodePool::available(topo, state, None);
    check_capacity(matrix, &pool)?;
    let all_caps = pool.capacities();
    let open: Vec<usize> = (0..all_caps.len()).filter(|&j| all_caps[j] > 0).collect();
    let space = search_space(matrix.cell_count(), open.len());
    let cap = config.cap.unwrap_or(f64::INFINITY);
    if space > cap || open.len() > 64 {
        return Err(BaselineError::EnumerationCap { space, cap });
    }
    let caps: Vec<usize> = open.iter().map(|&j| all_caps[j]).collect();

    let (wy, wt) = match config.unit {
        SchedulingUnit::Row => (alpha, beta),
        SchedulingUnit::Column => (beta, alpha),
    };
    let mut by_score = Dfs::new(matrix, &caps, Cost::Score { alpha, beta });
    by_score.run();
    let mut by_objective = Dfs::new(
        matrix,
        &caps,
        Cost::Objective {
            wy,
            wt,
            unit: config.unit,
        },
    );
    by_objective.run();

    let local = by_score
        .best_assign
        .expect("capacity checked, so a leaf exists");
    let pods: Vec<usize> = local.iter().map(|&l| open[l]).collect();
    Ok(Enumerated {
        placement: place_cells(matrix, topo, &pool, &pods),
        score: by_score.best,
        objective: by_objective.best,
        nodes_explored: by_score.nodes + by_objective.nodes,
    })
}

#[derive(Clone, Copy)]
enum Cost {
    Score {
        alpha: f64,
        beta: f64,
    },
    Objective {
        wy: f64,
        wt: f64,
        unit: SchedulingUnit,
    },
}

struct Dfs {
    rows: usize,
    cols: usize,
    caps: Vec<usize>,
    /// Next-lower id with the same capacity.
    class_prev: Vec<Option<usize>>,
    cost: Cost,
    assign: Vec<usize>,
    load: Vec<usize>,
    row_mask: Vec<u64>,
    col_mask: Vec<u64>,
    used: u64,
    /// `col_equal[r][c]`: columns `c` and `c+1` agree on rows `0..r`.
    col_equal: Vec<Vec<bool>>,
    best: f64,
    best_assign: Option<Vec<usize>>,
    nodes: u64,
}

impl Dfs {
    fn new(matrix: &CommMatrix, caps: &[usize], cost: Cost) -> Self {
        let k = caps.len();
        let class_prev = (0..k)
            .map(|j| (0..j).rev().find(|&i| caps[i] == caps[j]))
            .collect();
        let (rows, cols) = (matrix.rows, matrix.cols);
        let mut col_equal = vec![vec![true; cols.saturating_sub(1)]; rows + 1];
        col_equal[0].fill(true);
        Dfs {
            rows,
            cols,
            caps: caps.to_vec(),
            class_prev,
            cost,
            assign: vec![0; rows * cols],
            load: vec![0; k],
            row_mask: vec![0; rows],
            col_mask: vec![0; cols],
            used: 0,
            col_equal,
            best: f64::INFINITY,
            best_assign: None,
            nodes: 0,
        }
    }

    fn run(&mut self) {
        self.rec(0, false);
    }

    fn bound(&self) -> f64 {
        let spread = |m: &u64| spread_of_count(m.count_ones() as usize);
        let count = |m: &u64| m.count_ones() as usize;
        match self.cost {
            Cost::Score { alpha, beta } => {
                let dp = self.col_mask.iter().map(spread).max().unwrap_or(0);
                let pp = self.row_mask.iter().map(spread).max().unwrap_or(0);
                alpha * dp as f64 + beta * pp as f64
            }
            Cost::Objective { wy, wt, unit } => {
                let groups = match unit {
                    SchedulingUnit::Row => &self.row_mask,
                    SchedulingUnit::Column => &self.col_mask,
                };
                let t = groups.iter().map(count).max().unwrap_or(0);
                wy * self.used.count_ones() as f64 + wt * t as f64
            }
        }
    }

    /// `row_tight`: the current row equals the previous one so far.
    fn rec(&mut self, cell: usize, row_tight: bool) {
        self.nodes += 1;
        if self.bound() >= self.best - 1e-12 {
            return;
        }
        if cell == self.rows * self.cols {
            self.best = self.bound();
            self.best_assign = Some(self.assign.clone());
            return;
        }
        let (r, c) = (cell / self.cols, cell % self.cols);
        let row_tight = if c == 0 { r > 0 } else { row_tight };
        for j in 0..self.caps.len() {
            if self.load[j] == self.caps[j] {
                continue;
            }
            if self.used >> j & 1 == 0
                && self.class_prev[j].is_some_and(|i| self.used >> i & 1 == 0)
            {
                continue;
            }
            let mut next_tight = false;
            if row_tight {
                match j.cmp(&self.assign[cell - self.cols]) {
                    Ordering::Less => continue,
                    Ordering::Equal => next_tight = true,
                    Ordering::Greater => {}
                }
            }
            if c > 0 && self.col_equal[r][c - 1] && self.assign[cell - 1] > j {
                continue;
            }

            let (old_row, old_col, old_used) = (self.row_mask[r], self.col_mask[c], self.used);
            self.assign[cell] = j;
            self.load[j] += 1;
            self.row_mask[r] |= 1 << j;
            self.col_mask[c] |= 1 << j;
            self.used |= 1 << j;
            if c + 1 == self.cols {
                for i in 0..self.cols.saturating_sub(1) {
                    let base = r * self.cols;
                    self.col_equal[r + 1][i] =
                        self.col_equal[r][i] && self.assign[base + i] == self.assign[base + i + 1];
                }
            }
            self.rec(cell + 1, next_tight);
            self.load[j] -= 1;
            self.row_mask[r] = old_row;
            self.col_mask[c] = old_col;
            self.used = old_used;
        }
    }
}
