//! Instance generators shared by the integration tests.

use arnold::solver::SchedulingUnit;
use arnold::topology::{AllocationState, ClusterTopology, JobId, NodeStatus, TopologySpec};
use arnold::workload::CommMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Case {
    pub topo: ClusterTopology,
    pub state: AllocationState,
    pub matrix: CommMatrix,
    pub alpha: f64,
    pub unit: SchedulingUnit,
}

/// Every (minipods ≤ 4, groups ≤ 8, group size ≤ 4) combination, four
/// capacity draws each, with part of each minipod already occupied.
pub fn small_cases(seed: u64) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphas = [0.0, 0.1, 0.3, 0.5, 0.7, 1.0];
    let mut out = Vec::new();
    for k in 1..=4usize {
        for groups in 1..=8usize {
            for size in 1..=4usize {
                let need = groups * size;
                for draw in 0..4 {
                    let free: Vec<usize> = loop {
                        let c: Vec<usize> = (0..k).map(|_| rng.random_range(0..=need)).collect();
                        if c.iter().sum::<usize>() >= need {
                            break c;
                        }
                    };
                    let busy: Vec<usize> = (0..k).map(|_| rng.random_range(0..3)).collect();
                    let sizes: Vec<usize> = free
                        .iter()
                        .zip(&busy)
                        .map(|(f, b)| (f + b).max(1))
                        .collect();
                    let topo =
                        ClusterTopology::build(&TopologySpec::from_minipod_sizes("o", &sizes, 2))
                            .unwrap();
                    let mut state = AllocationState::new(&topo);
                    let mut occupy = Vec::new();
                    for (j, pod) in topo.minipods().iter().enumerate() {
                        for n in pod.nodes().skip(free[j]) {
                            occupy.push((n, NodeStatus::Occupied(JobId(99))));
                        }
                    }
                    state.apply(&occupy).unwrap();
                    let unit = if draw == 3 {
                        SchedulingUnit::Column
                    } else {
                        SchedulingUnit::Row
                    };
                    let matrix = match unit {
                        SchedulingUnit::Row => CommMatrix::shape(groups, size),
                        SchedulingUnit::Column => CommMatrix::shape(size, groups),
                    };
                    out.push(Case {
                        topo,
                        state,
                        matrix,
                        alpha: alphas[rng.random_range(0..alphas.len())],
                        unit,
                    });
                }
            }
        }
    }
    out
}
