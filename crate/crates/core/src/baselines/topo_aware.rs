//! Dual recursive bipartitioning: split the minipods into two halves of
//! similar capacity, split the job graph with FM into parts sized in
//! proportion, and recurse until every part maps to one minipod.

use std::cmp::Reverse;

use super::graph::{fm_partition, JobGraph};
use super::{check_capacity, place_cells, BaselineError};
use crate::metrics::Placement;
use crate::solver::NodePool;
use crate::topology::{AllocationState, ClusterTopology};
use crate::workload::CommMatrix;

/// Allowed deviation of a part from its proportional target.
const BALANCE_TOLERANCE: f64 = 0.1;

pub fn topo_aware(
    matrix: &CommMatrix,
    topo: &ClusterTopology,
    state: &AllocationState,
) -> Result<Placement, BaselineError> {
    let pool = NodePool::available(topo, state, None);
    check_capacity(matrix, &pool)?;
    let caps = pool.capacities();
    let n = matrix.cell_count();

    // The physical side is restricted to the fewest minipods that hold the
    // job: the tightest single one if any fits, else the largest ones.
    let pods: Vec<usize> = match (0..caps.len())
        .filter(|&j| caps[j] >= n)
        .min_by_key(|&j| (caps[j], j))
    {
        Some(j) => vec![j],
        None => {
            let mut order: Vec<usize> = (0..caps.len()).filter(|&j| caps[j] > 0).collect();
            order.sort_by_key(|&j| (Reverse(caps[j]), j));
            let mut acc = 0;
            let mut chosen: Vec<usize> = order
                .into_iter()
                .take_while(|&j| {
                    let before = acc;
                    acc += caps[j];
                    before < n
                })
                .collect();
            chosen.sort_unstable();
            chosen
        }
    };

    let graph = JobGraph::from_matrix(matrix);
    let mut assignment = vec![usize::MAX; n];
    let vertices: Vec<usize> = (0..n).collect();
    split(&graph, &vertices, &pods, &caps, &mut assignment);
    Ok(place_cells(matrix, topo, &pool, &assignment))
}

fn split(graph: &JobGraph, vertices: &[usize], pods: &[usize], caps: &[usize], out: &mut [usize]) {
    if vertices.is_empty() {
        return;
    }
    if pods.len() == 1 {
        for &v in vertices {
            out[v] = pods[0];
        }
        return;
    }
    // Cut point in id order that best balances capacity.
    let total: usize = pods.iter().map(|&j| caps[j]).sum();
    let mut left = 0;
    let mut best = (usize::MAX, 1);
    for s in 1..pods.len() {
        left += caps[pods[s - 1]];
        let diff = left.abs_diff(total - left);
        if diff < best.0 {
            best = (diff, s);
        }
    }
    let (left_pods, right_pods) = pods.split_at(best.1);
    let cap_l: usize = left_pods.iter().map(|&j| caps[j]).sum();
    let cap_r = total - cap_l;

    let n = vertices.len();
    let min_a = n.saturating_sub(cap_r);
    let max_a = cap_l.min(n);
    let target = ((n as f64 * cap_l as f64 / total as f64).round() as usize).clamp(min_a, max_a);
    let tol = ((BALANCE_TOLERANCE * target as f64).floor() as usize).max(1);
    let lo = target.saturating_sub(tol).max(min_a);
    let hi = (target + tol).min(max_a);

    let (part_a, part_b): (Vec<usize>, Vec<usize>) = if n == 1 {
        if target == 1 {
            (vertices.to_vec(), Vec::new())
        } else {
            (Vec::new(), vertices.to_vec())
        }
    } else {
        let sub = graph.subgraph(vertices);
        let part = fm_partition(&sub, target, lo, hi);
        (
            part.part_a.iter().map(|&i| vertices[i]).collect(),
            part.part_b.iter().map(|&i| vertices[i]).collect(),
        )
    };
    split(graph, &part_a, left_pods, caps, out);
    split(graph, &part_b, right_pods, caps, out);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{spread_summary, validate_placement};
    use crate::topology::TopologySpec;
    use crate::workload::VolumeVector;

    fn pp_heavy(rows: usize, cols: usize) -> CommMatrix {
        let volume = VolumeVector {
            weight_elems: 1.0,
            dp_bytes: 1.0,
            pp_bytes: 50.0,
        };
        CommMatrix::with_volume(rows, cols, volume, 1)
    }

    #[test]
    fn job_fitting_one_minipod_is_not_split() {
        let t = ClusterTopology::build(&TopologySpec::uniform("t", 3, 16)).unwrap();
        let s = AllocationState::new(&t);
        let p = topo_aware(&pp_heavy(6, 2), &t, &s).unwrap();
        assert_eq!(p.minipods_used(), 1);
        assert_eq!(spread_summary(&p).score(0.5, 0.5), 0.0);
    }

    #[test]
    fn setting_one_keeps_rows_whole() {
        let t = ClusterTopology::build(&TopologySpec::uniform("i", 3, 6)).unwrap();
        let s = AllocationState::new(&t);
        let m = pp_heavy(6, 2);
        let p = topo_aware(&m, &t, &s).unwrap();
        validate_placement(&p, &m, &t, Some((&s, None))).unwrap();
        let summary = spread_summary(&p);
        assert_eq!(summary.max_pp_spread, 0);
        assert_eq!(summary.max_dp_spread, 2);
    }

    #[test]
    fn respects_capacity_across_many_pods() {
        let t = ClusterTopology::build(&TopologySpec::from_minipod_sizes("t", &[5, 9, 3, 7, 4], 2))
            .unwrap();
        let s = AllocationState::new(&t);
        let m = pp_heavy(9, 3);
        let p = topo_aware(&m, &t, &s).unwrap();
        validate_placement(&p, &m, &t, Some((&s, None))).unwrap();
    }
}
