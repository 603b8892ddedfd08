//! Property tests for the invariants each module promises.

use std::collections::{BTreeMap, BTreeSet};

use arnold::baselines::{best_fit, enumerate_optimal, gpu_packing, random_fit, topo_aware};
use arnold::metrics::{
    spread_summary, validate_placement, weighted_spread, CellAssignment, Placement,
};
use arnold::queue::{oracle_predictor, JobKind, PolicyConfig, Scheduler, TraceJob};
use arnold::sim::{generate_trace, replay, EventKind, TraceConfig};
use arnold::solver::{
    schedule, solve, verify_solution, MipInstance, NodePool, SchedulingUnit, SolverConfig,
};
use arnold::topology::{AllocationState, ClusterTopology, JobId, NodeId, NodeStatus, TopologySpec};
use arnold::workload::{
    build_comm_matrix, dp_volume, lookup_affinity, Affinity, Architecture, CommMatrix, JobSpec,
    ModelHyper, ProfileDb,
};
use proptest::prelude::*;

fn topo(sizes: &[usize]) -> ClusterTopology {
    ClusterTopology::build(&TopologySpec::from_minipod_sizes("p", sizes, 4)).unwrap()
}

/// A placement whose cells land on arbitrary minipods of a `k`-pod cluster
/// large enough to hold every cell anywhere.
fn placement_strategy() -> impl Strategy<Value = (usize, Placement)> {
    (1usize..=5, 1usize..=6, 1usize..=6).prop_flat_map(|(k, rows, cols)| {
        proptest::collection::vec(0..k, rows * cols).prop_map(move |pods| {
            let cells = pods
                .iter()
                .enumerate()
                .map(|(i, &m)| CellAssignment {
                    minipod: m,
                    node: NodeId(m * 100 + i),
                })
                .collect();
            (k, Placement::from_cells(rows, cols, cells))
        })
    })
}

fn remap(
    p: &Placement,
    f: impl Fn(usize, usize) -> (usize, usize),
    pod: impl Fn(usize) -> usize,
) -> Placement {
    let mut cells = vec![None; p.rows() * p.cols()];
    for r in 0..p.rows() {
        for c in 0..p.cols() {
            let (r2, c2) = f(r, c);
            let cell = p.cell(r, c);
            cells[r2 * p.cols() + c2] = Some(CellAssignment {
                minipod: pod(cell.minipod),
                node: cell.node,
            });
        }
    }
    Placement::from_cells(
        p.rows(),
        p.cols(),
        cells.into_iter().map(Option::unwrap).collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn score_is_bounded((k, p) in placement_strategy(), alpha in 0.0f64..=1.0) {
        let s = spread_summary(&p).score(alpha, 1.0 - alpha);
        prop_assert!(s >= 0.0);
        prop_assert!(s <= k as f64 + 1e-12);
    }

    #[test]
    fn score_ignores_minipod_labels(
        (k, p) in placement_strategy(),
        alpha in 0.0f64..=1.0,
        shift in 0usize..5,
    ) {
        let relabeled = remap(&p, |r, c| (r, c), |m| (m + shift) % k);
        let a = spread_summary(&p).score(alpha, 1.0 - alpha);
        let b = spread_summary(&relabeled).score(alpha, 1.0 - alpha);
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn score_ignores_row_and_column_order(
        (_k, p) in placement_strategy(),
        alpha in 0.0f64..=1.0,
        rs in 0usize..6,
        cs in 0usize..6,
    ) {
        let (rows, cols) = (p.rows(), p.cols());
        let permuted = remap(&p, |r, c| ((r + rs) % rows, (cols - 1 - c + cs) % cols), |m| m);
        let a = spread_summary(&p).score(alpha, 1.0 - alpha);
        let b = spread_summary(&permuted).score(alpha, 1.0 - alpha);
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn allocation_state_conserves_nodes(
        sizes in proptest::collection::vec(1usize..8, 1..5),
        ops in proptest::collection::vec((0usize..64, 0u8..3, 1u64..4), 0..80),
    ) {
        let t = topo(&sizes);
        let mut state = AllocationState::new(&t);
        for (n, kind, job) in ops {
            let node = NodeId(n % t.node_count());
            let to = match kind {
                0 => NodeStatus::Free,
                1 => NodeStatus::Reserved(JobId(job)),
                _ => NodeStatus::Occupied(JobId(job)),
            };
            // Illegal transitions are rejected and leave the state untouched.
            let before = state.statuses().to_vec();
            if state.apply(&[(node, to)]).is_err() {
                prop_assert_eq!(state.statuses(), &before[..]);
            }
            prop_assert_eq!(
                state.free_count() + state.reserved_count() + state.occupied_count(),
                t.node_count()
            );
        }
        let rebuilt = topo(&sizes);
        prop_assert_eq!(rebuilt.minipods(), t.minipods());
    }

    #[test]
    fn comm_matrix_covers_every_node(tp_i in 0usize..4, pp in 1u64..9, dp in 1u64..17, mbs in 1u64..5) {
        let tp = [1u64, 2, 4, 8][tp_i];
        let gpus = tp * pp * dp;
        let spec = JobSpec {
            gpus,
            tp,
            pp,
            vp: 1,
            gb: dp * mbs,
            mb: 1,
            model: ModelHyper { vocab_size: 32000, seq_len: 2048, hidden: 1024, layers: pp * 4, arch: Architecture::Dense },
            gpu_type: String::new(),
            bytes_per_element: 2,
            dp_bytes: None,
            pp_bytes: None,
            dp_volume_multiplier: 1.0,
        };
        match build_comm_matrix(&spec) {
            Ok(m) => {
                prop_assert_eq!(gpus % 8, 0);
                prop_assert_eq!((m.rows * m.cols) as u64, gpus / 8);
            }
            // Rejected only when a node cannot hold whole TP groups of one stage.
            Err(_) => prop_assert!(!gpus.is_multiple_of(8) || dp % (8 / tp) != 0),
        }
    }

    #[test]
    fn dp_volume_falls_with_pp_and_grows_with_layers(pp_a in 1u64..8, step in 1u64..8, scale in 1u64..4) {
        let pp_b = pp_a + step;
        let layers = pp_a * pp_b * 2;
        let model = |l| ModelHyper { vocab_size: 32000, seq_len: 2048, hidden: 2048, layers: l, arch: Architecture::Dense };
        prop_assert!(dp_volume(&model(layers), pp_b).unwrap() < dp_volume(&model(layers), pp_a).unwrap());
        // Linear in depth: equal layer increments add equal volume.
        let v = |k: u64| dp_volume(&model(layers * k), pp_a).unwrap();
        let (d1, d2) = (v(scale + 1) - v(scale), v(scale + 2) - v(scale + 1));
        prop_assert!(d1 > 0.0);
        prop_assert!((d1 - d2).abs() <= 1e-9 * d1);
    }

    #[test]
    fn profile_lookup_yields_normalized_weights(r1 in 0.0f64..2.0, r2 in 0.0f64..1000.0, gpu in 0usize..2) {
        let db = ProfileDb::seeded();
        let (_, a) = lookup_affinity(&db, ["H800", "L20"][gpu], r1, r2).unwrap();
        prop_assert!((a.alpha + a.beta - 1.0).abs() < 1e-9);
    }

    #[test]
    fn solver_output_passes_the_checker(
        groups in 1usize..12,
        size in 1usize..6,
        extra in proptest::collection::vec(0usize..12, 1..7),
        alpha in 0.0f64..=1.0,
        col in any::<bool>(),
    ) {
        let need = groups * size;
        let mut available = extra.clone();
        available[0] += need;
        let inst = MipInstance {
            group_count: groups,
            group_size: size,
            available,
            alpha,
            beta: 1.0 - alpha,
            unit: if col { SchedulingUnit::Column } else { SchedulingUnit::Row },
        };
        let sol = solve(&inst, &SolverConfig::default()).unwrap();
        prop_assert!(verify_solution(&inst, &sol).is_empty());
        let again = solve(&inst, &SolverConfig::default()).unwrap();
        prop_assert_eq!((&sol.y, &sol.s, &sol.p, sol.t), (&again.y, &again.s, &again.p, again.t));
    }
}

fn small_instance() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, usize, usize, f64)> {
    (
        proptest::collection::vec(1usize..7, 1..4),
        proptest::collection::vec(0usize..3, 3),
        1usize..4,
        1usize..4,
        prop_oneof![Just(0.0), Just(0.1), Just(0.3), Just(0.5), Just(1.0)],
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn every_algorithm_emits_valid_placements_and_enumeration_dominates(
        (sizes, busy, rows, cols, alpha) in small_instance(),
        seed in any::<u64>(),
    ) {
        let t = topo(&sizes);
        let mut state = AllocationState::new(&t);
        let mut occupy = Vec::new();
        for (j, pod) in t.minipods().iter().enumerate() {
            for n in pod.nodes().take(busy[j]) {
                occupy.push((n, NodeStatus::Occupied(JobId(7))));
            }
        }
        state.apply(&occupy).unwrap();
        let matrix = CommMatrix::shape(rows, cols);
        let pool = NodePool::available(&t, &state, None);
        prop_assume!(pool.total() >= rows * cols);

        let beta = 1.0 - alpha;
        let exact = enumerate_optimal(&matrix, &t, &state, alpha, beta).unwrap();
        let solved = schedule(&matrix, &t, &pool, Affinity::from_alpha(alpha), SchedulingUnit::Row, &SolverConfig::default())
            .unwrap()
            .placement;
        let placements = [
            ("arnold", solved),
            ("enum", exact.placement.clone()),
            ("bestfit", best_fit(&matrix, &t, &state).unwrap()),
            ("random", random_fit(&matrix, &t, &state, seed).unwrap()),
            ("gpupack", gpu_packing(&matrix, &t, &state).unwrap()),
            ("topoaware", topo_aware(&matrix, &t, &state).unwrap()),
        ];
        for (name, p) in &placements {
            prop_assert!(
                validate_placement(p, &matrix, &t, Some((&state, None))).is_ok(),
                "{} produced an invalid placement", name
            );
            let s = weighted_spread(p, &matrix, alpha, beta).unwrap();
            prop_assert!(exact.score <= s + 1e-9, "{} scored {} below the optimum {}", name, s, exact.score);
        }
    }
}

fn generic_job(id: u64, submit: u64, duration: u64, nodes: usize, preemptable: bool) -> TraceJob {
    TraceJob {
        id: JobId(id),
        submit_time: submit,
        duration,
        nodes,
        priority: 0,
        preemptable,
        kind: JobKind::Generic,
        metadata: BTreeMap::new(),
    }
}

fn lpj_job(id: u64, nodes: usize, arrival: u64) -> TraceJob {
    TraceJob {
        id: JobId(id),
        submit_time: 0,
        duration: 3600,
        nodes,
        priority: 10,
        preemptable: false,
        kind: JobKind::Lpj {
            spec: JobSpec {
                gpus: nodes as u64 * 8,
                tp: 8,
                pp: 2,
                vp: 1,
                gb: nodes as u64,
                mb: 1,
                model: ModelHyper {
                    vocab_size: 32000,
                    seq_len: 2048,
                    hidden: 4096,
                    layers: 32,
                    arch: Architecture::Dense,
                },
                gpu_type: String::new(),
                bytes_per_element: 2,
                dp_bytes: None,
                pp_bytes: None,
                dp_volume_multiplier: 1.0,
            },
            arrival_time: arrival,
        },
        metadata: BTreeMap::new(),
    }
}

#[derive(Clone, Debug)]
enum Op {
    Submit {
        nodes: usize,
        duration: u64,
        preemptable: bool,
    },
    Step,
    Complete(usize),
    Advance(u64),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => (1usize..6, 1u64..20_000, any::<bool>())
            .prop_map(|(nodes, duration, preemptable)| Op::Submit { nodes, duration, preemptable }),
        3 => Just(Op::Step),
        2 => (0usize..16).prop_map(Op::Complete),
        2 => (1u64..3600).prop_map(Op::Advance),
    ]
}

/// Checks the invariants that must hold between any two scheduler calls.
fn audit(
    s: &Scheduler,
    submitted: &BTreeSet<JobId>,
    done: &BTreeSet<JobId>,
) -> Result<(), TestCaseError> {
    let topo = s.topology();
    let statuses = s.state().statuses();

    // Capacity safety: each node has one owner and every running job holds
    // exactly its own nodes.
    let mut held = 0;
    for (id, r) in s.running() {
        prop_assert_eq!(r.nodes.len(), r.job.nodes);
        for n in &r.nodes {
            prop_assert_eq!(statuses[n.index()], NodeStatus::Occupied(*id));
        }
        held += r.nodes.len();
    }
    prop_assert!(held <= s.state().occupied_count());
    for pod in topo.minipods() {
        let occupied = pod
            .nodes()
            .filter(|n| matches!(statuses[n.index()], NodeStatus::Occupied(_)))
            .count();
        prop_assert!(occupied <= pod.nodes().count());
    }

    // Conservation: every submitted generic job is queued, running or done.
    let queued: BTreeSet<JobId> = s.queue().iter().map(|j| j.id).collect();
    let running: BTreeSet<JobId> = s.running().keys().copied().collect();
    for id in submitted {
        let places = [queued.contains(id), running.contains(id), done.contains(id)];
        prop_assert_eq!(
            places.iter().filter(|&&b| b).count(),
            1,
            "job {:?} lost or duplicated",
            id
        );
    }

    // Retention never exceeds the occupied share of the zone.
    if let Some(zone) = s.zone() {
        let occupied = zone
            .nodes
            .iter()
            .filter(|n| matches!(statuses[n.index()], NodeStatus::Occupied(_)))
            .count();
        prop_assert!(s.retention_rate() <= occupied as f64 / zone.nodes.len() as f64 + 1e-12);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn scheduler_invariants_hold_under_random_operations(
        sizes in proptest::collection::vec(2usize..7, 2..4),
        lpj_half in 1usize..4,
        arrival in 600u64..20_000,
        noise in 0u32..3,
        ops in proptest::collection::vec(op(), 1..60),
    ) {
        let t = topo(&sizes);
        let lpj_nodes = (lpj_half * 2).min(t.node_count() / 2 * 2);
        let mut s = Scheduler::new(t, PolicyConfig::default());
        let predictor = oracle_predictor(noise, 3);
        let lpj = JobId(1000);
        s.submit(lpj_job(lpj.0, lpj_nodes, arrival)).unwrap();

        let mut now = 0u64;
        let mut next_id = 1u64;
        let mut submitted = BTreeSet::new();
        let mut done = BTreeSet::new();
        let mut arrived = false;
        for op in ops {
            if !arrived && now >= arrival {
                arrived = true;
                let nonpre: BTreeSet<JobId> = s.running().values().filter(|r| !r.job.preemptable).map(|r| r.job.id).collect();
                let a = s.lpj_arrival(now).unwrap();
                for id in &a.preempted {
                    prop_assert!(!nonpre.contains(id), "non-preemptible {:?} evicted", id);
                }
                for v in &a.violations {
                    prop_assert!(nonpre.contains(&v.job));
                }
            }
            match op {
                Op::Submit { nodes, duration, preemptable } => {
                    let nodes = nodes.min(s.topology().node_count());
                    let job = generic_job(next_id, now, duration, nodes, preemptable);
                    submitted.insert(job.id);
                    next_id += 1;
                    s.submit(job).unwrap();
                }
                Op::Step => {
                    let before: BTreeSet<JobId> = s.running().keys().copied().collect();
                    let out = s.policy_step(now, &predictor);
                    // A pass only starts jobs.
                    for id in before {
                        prop_assert!(s.running().contains_key(&id));
                    }
                    for p in out.scheduled {
                        prop_assert!(s.running().contains_key(&p.job));
                    }
                }
                Op::Complete(i) => {
                    let ids: Vec<JobId> = s.running().keys().copied().filter(|&id| id != lpj).collect();
                    if !ids.is_empty() {
                        let id = ids[i % ids.len()];
                        s.complete(id, now).unwrap();
                        done.insert(id);
                    }
                }
                Op::Advance(dt) => now += dt,
            }
            audit(&s, &submitted, &done)?;
        }
    }

    #[test]
    fn replay_is_deterministic_and_preempts_only_preemptible(seed in 0u64..1000, noise in 0u32..3) {
        let cfg = TraceConfig {
            jobs: 40,
            arrival_rate: 40.0,
            max_nodes: 6,
            preemptable_fraction: 0.3,
            seed,
            ..TraceConfig::default()
        };
        let trace = generate_trace(&cfg).unwrap();
        let t = topo(&[8, 8, 8]);
        let run = || replay(&trace, &t, &PolicyConfig::default(), &oracle_predictor(noise, seed)).unwrap();
        let (a, b) = (run(), run());
        prop_assert_eq!(a.log.to_jsonl(), b.log.to_jsonl());

        let preemptable: BTreeMap<JobId, bool> = trace.iter().map(|j| (j.id, j.preemptable)).collect();
        for e in a.log.of_kind(EventKind::Preempt) {
            prop_assert!(preemptable[&e.job]);
        }
        // Every job eventually starts and finishes.
        let started: BTreeSet<JobId> = a.log.of_kind(EventKind::Schedule).map(|e| e.job).collect();
        let finished: BTreeSet<JobId> = a.log.of_kind(EventKind::Complete).map(|e| e.job).collect();
        prop_assert_eq!(started.len(), trace.len());
        prop_assert_eq!(finished.len(), trace.len());
        // Events are time-ordered.
        prop_assert!(a.log.events().windows(2).all(|w| w[0].time <= w[1].time));
        // At most the whole cluster is ever allocated.
        prop_assert!(a.series.iter().all(|x| (0.0..=1.0).contains(&x.allocation_rate)));
    }
}

#[test]
fn topology_build_is_deterministic() {
    let spec = TopologySpec::from_minipod_sizes("d", &[5, 3, 9], 4);
    let a = ClusterTopology::build(&spec).unwrap();
    let b = ClusterTopology::build(&spec).unwrap();
    assert_eq!(a.minipods(), b.minipods());
    let nodes: Vec<NodeId> = a.nodes().collect();
    assert_eq!(nodes, (0..17).map(NodeId).collect::<Vec<_>>());
}
