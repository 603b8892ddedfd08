//! Comparison placement algorithms. Every algorithm maps matrix cells to
//! minipods and then hands out each minipod's usable nodes in (rack, id)
//! order, cells taken row-major.

mod enumerate;
mod graph;
mod topo_aware;

use std::cmp::Reverse;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::metrics::{CellAssignment, MetricsError, Placement};
use crate::solver::NodePool;
use crate::topology::{AllocationState, ClusterTopology};
use crate::workload::CommMatrix;

pub use enumerate::{
    enumerate_optimal, enumerate_optimal_with, search_space, Enumerated, EnumerationConfig,
    DEFAULT_ENUMERATION_CAP,
};
pub use graph::{fm_bipartition, fm_partition, Bipartition, JobGraph};
pub use topo_aware::topo_aware;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("job needs {required} nodes, {available} available")]
    Capacity { required: usize, available: usize },
    #[error("graph needs at least 2 vertices, got {0}")]
    GraphTooSmall(usize),
    #[error("balance must lie in (0, 0.5], got {0}")]
    Balance(f64),
    #[error("enumeration space {space:.3e} exceeds cap {cap:.3e}")]
    EnumerationCap { space: f64, cap: f64 },
    #[error(transparent)]
    Weights(#[from] MetricsError),
}

fn check_capacity(matrix: &CommMatrix, pool: &NodePool) -> Result<(), BaselineError> {
    let required = matrix.cell_count();
    let available = pool.total();
    if required > available {
        return Err(BaselineError::Capacity {
            required,
            available,
        });
    }
    Ok(())
}

/// Turns a row-major cell → minipod vector into a placement.
pub(crate) fn place_cells(
    matrix: &CommMatrix,
    topo: &ClusterTopology,
    pool: &NodePool,
    pods: &[usize],
) -> Placement {
    let mut next: Vec<Vec<_>> = (0..pool.minipod_count())
        .map(|j| {
            let need = pods.iter().filter(|&&p| p == j).count();
            let mut nodes = pool.nodes(j)[..need].to_vec();
            nodes.sort_by_key(|&n| (topo.home(n).expect("node in topology").rack, n));
            nodes.reverse();
            nodes
        })
        .collect();
    let cells = pods
        .iter()
        .map(|&minipod| CellAssignment {
            minipod,
            node: next[minipod].pop().expect("pod has room"),
        })
        .collect();
    Placement::from_cells(matrix.rows, matrix.cols, cells)
}

/// Each cell, row-major, goes to the minipod with the fewest remaining free
/// nodes that still has one (ties to the lower id).
pub fn best_fit(
    matrix: &CommMatrix,
    topo: &ClusterTopology,
    state: &AllocationState,
) -> Result<Placement, BaselineError> {
    let pool = NodePool::available(topo, state, None);
    check_capacity(matrix, &pool)?;
    let mut left = pool.capacities();
    let pods: Vec<usize> = (0..matrix.cell_count())
        .map(|_| {
            let j = (0..left.len())
                .filter(|&j| left[j] > 0)
                .min_by_key(|&j| (left[j], j))
                .expect("capacity checked");
            left[j] -= 1;
            j
        })
        .collect();
    Ok(place_cells(matrix, topo, &pool, &pods))
}

/// Each cell goes to a uniformly chosen minipod with room.
pub fn random_fit(
    matrix: &CommMatrix,
    topo: &ClusterTopology,
    state: &AllocationState,
    seed: u64,
) -> Result<Placement, BaselineError> {
    let pool = NodePool::available(topo, state, None);
    check_capacity(matrix, &pool)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut left = pool.capacities();
    let pods: Vec<usize> = (0..matrix.cell_count())
        .map(|_| {
            let open: Vec<usize> = (0..left.len()).filter(|&j| left[j] > 0).collect();
            let j = open[rng.random_range(0..open.len())];
            left[j] -= 1;
            j
        })
        .collect();
    Ok(place_cells(matrix, topo, &pool, &pods))
}

/// Fewest minipods that cover the job, largest first, filled in order.
pub fn gpu_packing(
    matrix: &CommMatrix,
    topo: &ClusterTopology,
    state: &AllocationState,
) -> Result<Placement, BaselineError> {
    let pool = NodePool::available(topo, state, None);
    check_capacity(matrix, &pool)?;
    let caps = pool.capacities();
    let pods = pack_largest_first(&caps, matrix.cell_count());
    Ok(place_cells(matrix, topo, &pool, &pods))
}

/// Cell → minipod list filling the largest minipods first.
pub(crate) fn pack_largest_first(caps: &[usize], cells: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..caps.len()).collect();
    order.sort_by_key(|&j| (Reverse(caps[j]), j));
    order
        .into_iter()
        .flat_map(|j| std::iter::repeat_n(j, caps[j]))
        .take(cells)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::validate_placement;
    use crate::topology::{JobId, NodeId, NodeStatus, TopologySpec};

    fn topo(sizes: &[usize]) -> ClusterTopology {
        ClusterTopology::build(&TopologySpec::from_minipod_sizes("t", sizes, 4)).unwrap()
    }

    fn load(p: &Placement, k: usize) -> Vec<usize> {
        let mut out = vec![0; k];
        for c in p.cells() {
            out[c.minipod] += 1;
        }
        out
    }

    #[test]
    fn best_fit_prefers_tight_minipod() {
        let t = topo(&[5, 12]);
        let s = AllocationState::new(&t);
        let m = CommMatrix::shape(6, 2);
        let p = best_fit(&m, &t, &s).unwrap();
        assert_eq!(load(&p, 2), vec![5, 7]);
        // The first five cells row-major land in minipod 0.
        assert!((0..5).all(|i| p.cells()[i].minipod == 0));
        validate_placement(&p, &m, &t, Some((&s, None))).unwrap();
    }

    #[test]
    fn best_fit_single_exact_minipod() {
        let t = topo(&[12, 20]);
        let s = AllocationState::new(&t);
        let p = best_fit(&CommMatrix::shape(6, 2), &t, &s).unwrap();
        assert_eq!(load(&p, 2), vec![12, 0]);
    }

    #[test]
    fn packing_uses_fewest_minipods() {
        let t = topo(&[6, 6, 6]);
        let s = AllocationState::new(&t);
        let p = gpu_packing(&CommMatrix::shape(6, 2), &t, &s).unwrap();
        assert_eq!(load(&p, 3), vec![6, 6, 0]);
        let p = gpu_packing(&CommMatrix::shape(2, 2), &t, &s).unwrap();
        assert_eq!(p.minipods_used(), 1);
    }

    #[test]
    fn random_fit_is_seeded() {
        let t = topo(&[6, 6, 6]);
        let s = AllocationState::new(&t);
        let m = CommMatrix::shape(6, 2);
        let a = random_fit(&m, &t, &s, 7).unwrap();
        assert_eq!(a, random_fit(&m, &t, &s, 7).unwrap());
        validate_placement(&a, &m, &t, Some((&s, None))).unwrap();
        let one = topo(&[16]);
        let p = random_fit(&m, &one, &AllocationState::new(&one), 3).unwrap();
        assert_eq!(p.minipods_used(), 1);
    }

    #[test]
    fn random_fit_load_is_roughly_uniform() {
        // Capacity far above demand so slack never binds.
        let t = topo(&[4000, 4000, 4000, 4000]);
        let s = AllocationState::new(&t);
        let n = 1200;
        let p = random_fit(&CommMatrix::shape(n, 1), &t, &s, 11).unwrap();
        let mean = n as f64 / 4.0;
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for l in load(&p, 4) {
            assert!((l as f64 - mean).abs() <= 3.0 * sigma, "load {l}");
        }
    }

    #[test]
    fn capacity_errors() {
        let t = topo(&[4, 4]);
        let mut s = AllocationState::new(&t);
        s.apply(&[(NodeId(0), NodeStatus::Occupied(JobId(1)))])
            .unwrap();
        let m = CommMatrix::shape(4, 2);
        assert!(matches!(
            best_fit(&m, &t, &s),
            Err(BaselineError::Capacity { .. })
        ));
        assert!(random_fit(&m, &t, &s, 0).is_err());
        assert!(gpu_packing(&m, &t, &s).is_err());
    }
}
