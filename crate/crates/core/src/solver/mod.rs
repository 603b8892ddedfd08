//! Max-spread placement MIP and its exact solver.
//!
//! Scheduling units (matrix rows by default) are treated as identical groups
//! of `group_size` nodes. Variables: `y_j` marks a used minipod, `s_ij` marks
//! minipod `j` in group `i`'s support, `p_ij` is the fraction of group `i`
//! placed in `j`, and `T` bounds every group's support size. The objective is
//! `w_y·Σy + w_t·T`, subject to `Σ_j s_ij ≤ T`, `Σ_i p_ij ≤ c_j·y_j`,
//! `Σ_j p_ij = 1` and `p_ij ≤ s_ij`.

mod bnb;
mod discretize;
mod flow;
mod verify;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{check_weights, MetricsError, Placement};
use crate::topology::{AllocationState, ClusterTopology, JobId, NodeId};
use crate::workload::{Affinity, CommMatrix};

pub use bnb::solve;
pub use discretize::{assign_ranks, assign_ranks_in, discretize, NodeCounts};
pub use flow::max_flow_assignment;
pub use verify::{verify_solution, ConstraintViolation};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("infeasible: job needs {required} nodes, {available} available")]
    Infeasible { required: usize, available: usize },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error(transparent)]
    Weights(#[from] MetricsError),
    #[error("stale state: minipod {minipod} needs {needed} nodes but only {available} are usable")]
    StaleState {
        minipod: usize,
        needed: usize,
        available: usize,
    },
    #[error("could not repair capacity overflow of group {group}")]
    RepairFailed { group: usize },
    #[error("solution violates constraints: {0:?}")]
    Violations(Vec<ConstraintViolation>),
}

/// Which matrix dimension forms an indivisible MIP group.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulingUnit {
    /// PP groups.
    #[default]
    Row,
    /// DP groups.
    Column,
}

impl SchedulingUnit {
    /// `(group_count, group_size)` of a matrix under this unit.
    pub fn dims(self, matrix: &CommMatrix) -> (usize, usize) {
        match self {
            SchedulingUnit::Row => (matrix.rows, matrix.cols),
            SchedulingUnit::Column => (matrix.cols, matrix.rows),
        }
    }

    /// Matrix `(row, col)` of position `pos` inside group `group`.
    pub fn cell(self, group: usize, pos: usize) -> (usize, usize) {
        match self {
            SchedulingUnit::Row => (group, pos),
            SchedulingUnit::Column => (pos, group),
        }
    }
}

/// Nodes a placement may use, per minipod, in preference order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodePool {
    per_minipod: Vec<Vec<NodeId>>,
}

impl NodePool {
    /// Free nodes plus nodes reserved for `reserved_for`, in (rack, id) order.
    pub fn available(
        topo: &ClusterTopology,
        state: &AllocationState,
        reserved_for: Option<JobId>,
    ) -> Self {
        let per_minipod = (0..topo.minipod_count())
            .map(|m| {
                state
                    .usable_nodes(topo, m, reserved_for)
                    .expect("minipod index in range")
                    .collect()
            })
            .collect();
        NodePool { per_minipod }
    }

    pub fn from_lists(per_minipod: Vec<Vec<NodeId>>) -> Self {
        NodePool { per_minipod }
    }

    pub fn minipod_count(&self) -> usize {
        self.per_minipod.len()
    }

    pub fn nodes(&self, minipod: usize) -> &[NodeId] {
        &self.per_minipod[minipod]
    }

    pub fn capacities(&self) -> Vec<usize> {
        self.per_minipod.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.per_minipod.iter().map(Vec::len).sum()
    }
}

/// The MIP for one job. `available[j]` is in nodes; the normalized capacity
/// `c_j` is `available[j] / group_size` groups.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MipInstance {
    pub group_count: usize,
    pub group_size: usize,
    pub available: Vec<usize>,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub unit: SchedulingUnit,
}

impl MipInstance {
    pub fn minipod_count(&self) -> usize {
        self.available.len()
    }

    pub fn capacities(&self) -> Vec<f64> {
        self.available
            .iter()
            .map(|&a| a as f64 / self.group_size as f64)
            .collect()
    }

    pub fn demand(&self) -> usize {
        self.group_count * self.group_size
    }

    /// Weights on `(Σy, T)`. With row units `T` bounds PP-group spread and
    /// `Σy` stands in for DP-group spread, so the pair is `(α, β)`; column
    /// units swap the roles.
    pub fn weights(&self) -> (f64, f64) {
        match self.unit {
            SchedulingUnit::Row => (self.alpha, self.beta),
            SchedulingUnit::Column => (self.beta, self.alpha),
        }
    }

    pub fn objective(&self, minipods_used: usize, t: usize) -> f64 {
        let (wy, wt) = self.weights();
        wy * minipods_used as f64 + wt * t as f64
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.group_count == 0 || self.group_size == 0 {
            return Err(SolverError::InvalidInstance(
                "group_count and group_size must be positive".into(),
            ));
        }
        if self.available.is_empty() {
            return Err(SolverError::InvalidInstance("no minipods".into()));
        }
        check_weights(self.alpha, self.beta)?;
        Ok(())
    }

    /// Capacity precheck; the only way an instance can be infeasible.
    pub fn check_capacity(&self) -> Result<(), SolverError> {
        let available: usize = self.available.iter().sum();
        if available < self.demand() {
            return Err(SolverError::Infeasible {
                required: self.demand(),
                available,
            });
        }
        Ok(())
    }
}

pub fn build_mip(
    matrix: &CommMatrix,
    topo: &ClusterTopology,
    state: &AllocationState,
    alpha: f64,
    beta: f64,
    unit: SchedulingUnit,
) -> Result<MipInstance, SolverError> {
    build_mip_from_pool(
        matrix,
        &NodePool::available(topo, state, None),
        alpha,
        beta,
        unit,
    )
}

pub fn build_mip_from_pool(
    matrix: &CommMatrix,
    pool: &NodePool,
    alpha: f64,
    beta: f64,
    unit: SchedulingUnit,
) -> Result<MipInstance, SolverError> {
    let (group_count, group_size) = unit.dims(matrix);
    let inst = MipInstance {
        group_count,
        group_size,
        available: pool.capacities(),
        alpha,
        beta,
        unit,
    };
    inst.validate()?;
    inst.check_capacity()?;
    Ok(inst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Seconds.
    pub time_limit: f64,
    /// Cap on exact-search nodes; `None` for no cap.
    pub node_limit: Option<u64>,
    pub symmetry_breaking: bool,
    /// Recorded in dumps. The search itself draws no random numbers.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            time_limit: 10.0,
            node_limit: None,
            symmetry_breaking: true,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn time_limit(&self) -> Duration {
        Duration::from_secs_f64(self.time_limit)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.time_limit > 0.0 && self.time_limit.is_finite()) {
            return Err(SolverError::InvalidInstance(format!(
                "time_limit must be positive, got {}",
                self.time_limit
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    FeasibleTimeLimit,
    Infeasible,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub candidates_checked: u64,
    pub nodes_explored: u64,
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MipSolution {
    pub y: Vec<bool>,
    /// Group × minipod.
    pub s: Vec<Vec<bool>>,
    /// Group × minipod.
    pub p: Vec<Vec<f64>>,
    #[serde(rename = "T")]
    pub t: usize,
    pub objective: f64,
    pub status: SolveStatus,
    pub stats: SolveStats,
}

impl MipSolution {
    pub fn minipods_used(&self) -> usize {
        self.y.iter().filter(|&&b| b).count()
    }

    /// Builds y, s, p, T from integral node counts.
    pub fn from_counts(
        inst: &MipInstance,
        counts: &[Vec<usize>],
        status: SolveStatus,
        stats: SolveStats,
    ) -> Self {
        let k = inst.minipod_count();
        let g = inst.group_size as f64;
        let s: Vec<Vec<bool>> = counts
            .iter()
            .map(|row| row.iter().map(|&n| n > 0).collect())
            .collect();
        let p = counts
            .iter()
            .map(|row| row.iter().map(|&n| n as f64 / g).collect())
            .collect();
        let y: Vec<bool> = (0..k).map(|j| s.iter().any(|row| row[j])).collect();
        let t = s
            .iter()
            .map(|row| row.iter().filter(|&&b| b).count())
            .max()
            .unwrap_or(0);
        let used = y.iter().filter(|&&b| b).count();
        MipSolution {
            objective: inst.objective(used, t),
            y,
            s,
            p,
            t,
            status,
            stats,
        }
    }
}

/// Output of the full pipeline: solve, discretize, assign ranks.
#[derive(Clone, Debug)]
pub struct Scheduled {
    pub instance: MipInstance,
    pub solution: MipSolution,
    pub counts: NodeCounts,
    pub placement: Placement,
}

pub fn schedule(
    matrix: &CommMatrix,
    topo: &ClusterTopology,
    pool: &NodePool,
    affinity: Affinity,
    unit: SchedulingUnit,
    config: &SolverConfig,
) -> Result<Scheduled, SolverError> {
    let instance = build_mip_from_pool(matrix, pool, affinity.alpha, affinity.beta, unit)?;
    let solution = solve(&instance, config)?;
    let violations = verify_solution(&instance, &solution);
    if !violations.is_empty() {
        return Err(SolverError::Violations(violations));
    }
    let counts = discretize(&solution, &instance)?;
    let placement = assign_ranks_in(&counts, matrix, topo, pool)?;
    Ok(Scheduled {
        instance,
        solution,
        counts,
        placement,
    })
}
