//! Fractional allocations to node counts, and node counts to ranked nodes.

use serde::{Deserialize, Serialize};

use super::{MipInstance, MipSolution, NodePool, SchedulingUnit, SolverError};
use crate::metrics::{CellAssignment, Placement};
use crate::topology::{AllocationState, ClusterTopology};
use crate::workload::CommMatrix;

/// Integral nodes per (group, minipod).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeCounts {
    pub unit: SchedulingUnit,
    pub group_size: usize,
    /// Group × minipod.
    pub counts: Vec<Vec<usize>>,
}

impl NodeCounts {
    pub fn minipod_load(&self, minipod: usize) -> usize {
        self.counts.iter().map(|row| row[minipod]).sum()
    }
}

/// Largest-remainder rounding of `p_ij·group_size` within each group, then
/// single-node moves out of any over-full minipod into another selected
/// minipod of the same group that still has room.
pub fn discretize(sol: &MipSolution, inst: &MipInstance) -> Result<NodeCounts, SolverError> {
    let g = inst.group_size;
    let k = inst.minipod_count();
    let mut counts = Vec::with_capacity(inst.group_count);
    for (i, (p_row, s_row)) in sol.p.iter().zip(&sol.s).enumerate() {
        let exact: Vec<f64> = p_row.iter().map(|&p| p * g as f64).collect();
        let mut row: Vec<usize> = exact.iter().map(|&x| (x + 1e-9).floor() as usize).collect();
        let assigned: usize = row.iter().sum();
        if assigned > g {
            return Err(SolverError::RepairFailed { group: i });
        }
        let mut order: Vec<usize> = (0..k).filter(|&j| s_row[j]).collect();
        if order.is_empty() {
            return Err(SolverError::RepairFailed { group: i });
        }
        // Sort by fractional part, largest first; stable on index.
        order.sort_by(|&a, &b| {
            let fa = exact[a] - row[a] as f64;
            let fb = exact[b] - row[b] as f64;
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for step in 0..g - assigned {
            row[order[step % order.len()]] += 1;
        }
        counts.push(row);
    }

    for j in 0..k {
        while counts.iter().map(|row| row[j]).sum::<usize>() > inst.available[j] {
            let mv = (0..counts.len()).find_map(|i| {
                if counts[i][j] == 0 {
                    return None;
                }
                (0..k)
                    .filter(|&d| d != j && sol.s[i][d])
                    .find(|&d| counts.iter().map(|row| row[d]).sum::<usize>() < inst.available[d])
                    .map(|d| (i, d))
            });
            match mv {
                Some((i, d)) => {
                    counts[i][j] -= 1;
                    counts[i][d] += 1;
                }
                None => {
                    let group = (0..counts.len()).find(|&i| counts[i][j] > 0).unwrap_or(0);
                    return Err(SolverError::RepairFailed { group });
                }
            }
        }
    }
    Ok(NodeCounts {
        unit: inst.unit,
        group_size: g,
        counts,
    })
}

/// [`assign_ranks_in`] over the free nodes of `state`.
pub fn assign_ranks(
    counts: &NodeCounts,
    matrix: &CommMatrix,
    topo: &ClusterTopology,
    state: &AllocationState,
) -> Result<Placement, SolverError> {
    assign_ranks_in(
        counts,
        matrix,
        topo,
        &NodePool::available(topo, state, None),
    )
}

/// Lays each group out along its positions with minipods in id order, so a
/// group's cells in one minipod are contiguous and equal counts line up
/// across groups. Inside a minipod, cells in (group, position) order take
/// the pool's first nodes re-sorted by (rack, node id). Ranks are row-major.
pub fn assign_ranks_in(
    counts: &NodeCounts,
    matrix: &CommMatrix,
    topo: &ClusterTopology,
    pool: &NodePool,
) -> Result<Placement, SolverError> {
    let (groups, size) = counts.unit.dims(matrix);
    if counts.counts.len() != groups
        || counts.group_size != size
        || counts
            .counts
            .iter()
            .any(|row| row.iter().sum::<usize>() != size)
    {
        return Err(SolverError::InvalidInstance(format!(
            "node counts do not describe {groups} groups of {size}"
        )));
    }
    let k = pool.minipod_count();
    if counts.counts.iter().any(|row| row.len() != k) {
        return Err(SolverError::InvalidInstance(format!(
            "node counts cover a different number of minipods than the pool ({k})"
        )));
    }

    let mut nodes_for = Vec::with_capacity(k);
    for j in 0..k {
        let needed = counts.minipod_load(j);
        let usable = pool.nodes(j);
        if needed > usable.len() {
            return Err(SolverError::StaleState {
                minipod: j,
                needed,
                available: usable.len(),
            });
        }
        let mut chosen = usable[..needed].to_vec();
        chosen.sort_by_key(|&n| {
            let home = topo.home(n).expect("pool nodes belong to the topology");
            (home.rack, n)
        });
        // Reverse so `pop` hands them out in ascending order.
        chosen.reverse();
        nodes_for.push(chosen);
    }

    let mut cells = vec![None; matrix.rows * matrix.cols];
    for (i, row) in counts.counts.iter().enumerate() {
        let mut pos = 0;
        for (j, &n) in row.iter().enumerate() {
            for _ in 0..n {
                let (r, c) = counts.unit.cell(i, pos);
                let node = nodes_for[j].pop().expect("load matches node count");
                cells[r * matrix.cols + c] = Some(CellAssignment { minipod: j, node });
                pos += 1;
            }
        }
    }
    let cells = cells
        .into_iter()
        .map(|c| c.expect("every position filled"))
        .collect();
    Ok(Placement::from_cells(matrix.rows, matrix.cols, cells))
}
