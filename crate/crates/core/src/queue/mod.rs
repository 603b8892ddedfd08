//! Queueing policy around one announced LPJ (large pre-training job).
//!
//! When an LPJ is announced its placement is planned at once and the planned
//! nodes form a reserved zone. Until the LPJ arrives, other jobs may use the
//! zone only if they are preemptible or are predicted to finish before the
//! arrival. At arrival, preemptible occupants are evicted and re-queued, and
//! non-preemptible ones still on zone nodes are reported as violations.

mod predictor;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::Placement;
use crate::solver::{schedule, NodePool, SchedulingUnit, SolverConfig, SolverError};
use crate::topology::{AllocationState, ClusterTopology, JobId, NodeId, NodeStatus, TopologyError};
use crate::workload::{build_comm_matrix_for, Affinity, JobSpec, WorkloadError};

pub use predictor::{
    bucket_of, bucket_rmse, bucket_upper_bound, histogram_predictor, oracle_predictor,
    HistogramJct, JctPredictor, OracleJct, BUCKET_SECONDS,
};

#[derive(Debug, Error)]
pub enum QueueError {
    #[error("job {id}: {reason}")]
    InvalidJob { id: JobId, reason: String },
    #[error("job {0} is not an LPJ")]
    NotLpj(JobId),
    #[error("a reservation for job {0} is already active")]
    ZoneActive(JobId),
    #[error("no reservation is active")]
    NoZone,
    #[error("job {0} is not running")]
    NotRunning(JobId),
    #[error("reservation for job {lpj} refused: {source}")]
    Reservation {
        lpj: JobId,
        #[source]
        source: SolverError,
    },
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JobKind {
    #[default]
    Generic,
    /// Announced at `submit_time`, starts at `arrival_time`.
    Lpj { spec: JobSpec, arrival_time: u64 },
}

/// One job of a trace. Times are integer seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceJob {
    pub id: JobId,
    pub submit_time: u64,
    /// Ground truth. The policy itself never reads it; predictors may.
    pub duration: u64,
    pub nodes: usize,
    #[serde(default)]
    pub priority: i64,
    #[serde(default)]
    pub preemptable: bool,
    #[serde(default)]
    pub kind: JobKind,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl TraceJob {
    pub fn is_lpj(&self) -> bool {
        matches!(self.kind, JobKind::Lpj { .. })
    }

    pub fn validate(&self, gpus_per_node: u32) -> Result<(), QueueError> {
        let bad = |reason: String| QueueError::InvalidJob {
            id: self.id,
            reason,
        };
        if self.duration == 0 {
            return Err(bad("duration must be positive".into()));
        }
        if self.nodes == 0 {
            return Err(bad("must request at least one node".into()));
        }
        if let JobKind::Lpj { spec, arrival_time } = &self.kind {
            if *arrival_time < self.submit_time {
                return Err(bad(format!(
                    "arrival {arrival_time} precedes announcement {}",
                    self.submit_time
                )));
            }
            let matrix = build_comm_matrix_for(spec, u64::from(gpus_per_node))?;
            if matrix.cell_count() != self.nodes {
                return Err(bad(format!(
                    "spec needs {} nodes, job requests {}",
                    matrix.cell_count(),
                    self.nodes
                )));
            }
        }
        Ok(())
    }
}

/// Nodes set aside for an announced LPJ.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReservedZone {
    pub lpj_id: JobId,
    /// Sorted; equal to the node set of `placement`.
    pub nodes: Vec<NodeId>,
    pub arrival_time: u64,
    pub placement: Placement,
}

impl ReservedZone {
    pub fn contains(&self, node: NodeId) -> bool {
        self.nodes.binary_search(&node).is_ok()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// DP weight for the LPJ placement; the PP weight is `1 - alpha`.
    pub alpha: f64,
    pub unit: SchedulingUnit,
    pub solver: SolverConfig,
    /// Seconds between policy passes.
    pub interval: u64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            alpha: 0.5,
            unit: SchedulingUnit::Row,
            solver: SolverConfig::default(),
            interval: 30,
        }
    }
}

/// Which branch of the policy placed a job.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Preemptible, placed anywhere including the zone.
    Preemptible,
    /// Fit in free nodes outside the zone.
    Outside,
    /// Predicted to finish before the LPJ arrives, allowed into the zone.
    Backfill,
    /// The LPJ itself, on its zone.
    Lpj,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Placed {
    pub job: JobId,
    pub nodes: Vec<NodeId>,
    pub branch: Branch,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StepOutcome {
    pub scheduled: Vec<Placed>,
    /// In queue order; these form the next queue.
    pub delayed: Vec<JobId>,
}

/// A non-preemptible job still holding zone nodes when the LPJ arrived.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub job: JobId,
    pub nodes: Vec<NodeId>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Arrival {
    pub preempted: Vec<JobId>,
    pub violations: Vec<Violation>,
    /// Set when every zone node was clean and the LPJ started at once.
    pub started: Option<Placed>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunningJob {
    pub job: TraceJob,
    pub nodes: Vec<NodeId>,
    pub start: u64,
    /// Distinguishes successive runs of a re-queued job.
    pub run: u64,
}

/// One row of the per-pass time series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TickSample {
    pub time: u64,
    pub allocation_rate: f64,
    pub retention_rate: f64,
    pub queue_length: usize,
    pub delayed_count: usize,
}

pub fn write_series_csv<W: Write>(out: W, samples: &[TickSample]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    if samples.is_empty() {
        w.write_record([
            "time",
            "allocation_rate",
            "retention_rate",
            "queue_length",
            "delayed_count",
        ])?;
    }
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

/// Occupied nodes over all nodes. Reserved-but-idle nodes do not count.
pub fn allocation_rate(state: &AllocationState) -> f64 {
    let total = state.statuses().len();
    if total == 0 {
        return 0.0;
    }
    state.occupied_count() as f64 / total as f64
}

/// Zone nodes held by jobs other than the LPJ that cannot be preempted,
/// over the zone size.
pub fn retention_rate(
    zone: &ReservedZone,
    state: &AllocationState,
    preemptable: impl Fn(JobId) -> bool,
) -> f64 {
    if zone.nodes.is_empty() {
        return 0.0;
    }
    let held = zone
        .nodes
        .iter()
        .filter(|&&n| match state.status(n) {
            Ok(NodeStatus::Occupied(j)) => j != zone.lpj_id && !preemptable(j),
            _ => false,
        })
        .count();
    held as f64 / zone.nodes.len() as f64
}

#[derive(Clone, Debug)]
struct PendingLpj {
    job: TraceJob,
    zone: ReservedZone,
    arrived: bool,
}

/// Single-writer policy state: cluster occupancy, the wait queue, running
/// jobs and at most one reservation.
#[derive(Clone, Debug)]
pub struct Scheduler {
    topo: ClusterTopology,
    state: AllocationState,
    config: PolicyConfig,
    queue: Vec<TraceJob>,
    running: BTreeMap<JobId, RunningJob>,
    lpj: Option<PendingLpj>,
    next_run: u64,
}

impl Scheduler {
    pub fn new(topo: ClusterTopology, config: PolicyConfig) -> Self {
        let state = AllocationState::new(&topo);
        Scheduler {
            topo,
            state,
            config,
            queue: Vec::new(),
            running: BTreeMap::new(),
            lpj: None,
            next_run: 0,
        }
    }

    pub fn topology(&self) -> &ClusterTopology {
        &self.topo
    }

    pub fn state(&self) -> &AllocationState {
        &self.state
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn queue(&self) -> &[TraceJob] {
        &self.queue
    }

    pub fn running(&self) -> &BTreeMap<JobId, RunningJob> {
        &self.running
    }

    pub fn zone(&self) -> Option<&ReservedZone> {
        self.lpj.as_ref().map(|p| &p.zone)
    }

    /// True while an LPJ is announced or waiting on straggler nodes.
    pub fn lpj_pending(&self) -> bool {
        self.lpj.is_some()
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty() && self.running.is_empty() && self.lpj.is_none()
    }

    /// Queues a generic job, or plans and reserves for an LPJ.
    pub fn submit(&mut self, job: TraceJob) -> Result<(), QueueError> {
        job.validate(self.topo.gpus_per_node)?;
        if job.is_lpj() {
            self.reserve_for_lpj(job)?;
        } else {
            self.queue.push(job);
        }
        Ok(())
    }

    /// Plans the LPJ over every node of the cluster, preferring free nodes,
    /// then nodes of preemptible jobs, then the rest. Free planned nodes are
    /// reserved now; occupied ones join the reservation when released.
    pub fn reserve_for_lpj(&mut self, lpj: TraceJob) -> Result<&ReservedZone, QueueError> {
        let JobKind::Lpj { spec, arrival_time } = &lpj.kind else {
            return Err(QueueError::NotLpj(lpj.id));
        };
        if let Some(p) = &self.lpj {
            return Err(QueueError::ZoneActive(p.job.id));
        }
        lpj.validate(self.topo.gpus_per_node)?;
        let matrix = build_comm_matrix_for(spec, u64::from(self.topo.gpus_per_node))?;
        let pool = self.planning_pool();
        let planned = schedule(
            &matrix,
            &self.topo,
            &pool,
            Affinity::from_alpha(self.config.alpha),
            self.config.unit,
            &self.config.solver,
        )
        .map_err(|source| QueueError::Reservation {
            lpj: lpj.id,
            source,
        })?;
        let mut nodes: Vec<NodeId> = planned.placement.nodes().collect();
        nodes.sort_unstable();
        let transitions: Vec<_> = nodes
            .iter()
            .filter(|&&n| self.state.statuses()[n.index()].is_free())
            .map(|&n| (n, NodeStatus::Reserved(lpj.id)))
            .collect();
        self.state.apply(&transitions)?;
        log::info!(
            "reserved {} nodes for {} ({} pending release)",
            nodes.len(),
            lpj.id,
            nodes.len() - transitions.len()
        );
        let zone = ReservedZone {
            lpj_id: lpj.id,
            nodes,
            arrival_time: *arrival_time,
            placement: planned.placement,
        };
        self.lpj = Some(PendingLpj {
            job: lpj,
            zone,
            arrived: false,
        });
        Ok(&self.lpj.as_ref().expect("just set").zone)
    }

    fn planning_pool(&self) -> NodePool {
        let rank = |n: NodeId| match self.state.statuses()[n.index()] {
            NodeStatus::Free => 0,
            NodeStatus::Occupied(j) if self.is_preemptable(j) => 1,
            _ => 2,
        };
        let lists = self
            .topo
            .minipods()
            .iter()
            .map(|pod| {
                let mut nodes: Vec<NodeId> = pod.nodes().collect();
                // `nodes()` is already in (rack, id) order; the sort is stable.
                nodes.sort_by_key(|&n| rank(n));
                nodes
            })
            .collect();
        NodePool::from_lists(lists)
    }

    fn is_preemptable(&self, job: JobId) -> bool {
        self.running.get(&job).is_some_and(|r| r.job.preemptable)
    }

    /// One pass over the queue in (priority desc, submit time, id) order.
    pub fn policy_step(&mut self, now: u64, predictor: &dyn JctPredictor) -> StepOutcome {
        let mut jobs = std::mem::take(&mut self.queue);
        jobs.sort_by_key(|j| (Reverse(j.priority), j.submit_time, j.id));
        let mut out = StepOutcome::default();
        for job in jobs {
            let outside = self.free_outside();
            let zone = self.zone_free();
            let outside_total: usize = outside.iter().map(Vec::len).sum();
            let zone_total: usize = zone.iter().map(Vec::len).sum();
            let merged = || -> Vec<Vec<NodeId>> {
                outside
                    .iter()
                    .zip(&zone)
                    .map(|(a, b)| a.iter().chain(b).copied().collect())
                    .collect()
            };

            let choice = if job.preemptable {
                (job.nodes <= outside_total + zone_total).then(|| (merged(), Branch::Preemptible))
            } else if job.nodes <= outside_total {
                Some((outside.clone(), Branch::Outside))
            } else if job.nodes <= outside_total + zone_total
                && self.backfill_allowed(&job, now, predictor)
            {
                Some((merged(), Branch::Backfill))
            } else {
                None
            };

            match choice.and_then(|(pool, branch)| bin_pack(&pool, job.nodes).map(|n| (n, branch)))
            {
                Some((nodes, branch)) => {
                    self.start(job.clone(), nodes.clone(), now);
                    out.scheduled.push(Placed {
                        job: job.id,
                        nodes,
                        branch,
                    });
                }
                None => {
                    out.delayed.push(job.id);
                    self.queue.push(job);
                }
            }
        }
        out
    }

    fn backfill_allowed(&self, job: &TraceJob, now: u64, predictor: &dyn JctPredictor) -> bool {
        match &self.lpj {
            Some(p) if !p.arrived => {
                now + bucket_upper_bound(predictor.predict_bucket(job)) < p.zone.arrival_time
            }
            _ => false,
        }
    }

    /// Free nodes per minipod in (rack, id) order. Free nodes are never in
    /// the zone before arrival, since zone nodes are reserved on release.
    fn free_outside(&self) -> Vec<Vec<NodeId>> {
        self.per_pod(|s| s.is_free())
    }

    /// Zone nodes not currently used by anyone.
    fn zone_free(&self) -> Vec<Vec<NodeId>> {
        match &self.lpj {
            Some(p) if !p.arrived => {
                let id = p.job.id;
                self.per_pod(|s| s == NodeStatus::Reserved(id))
            }
            _ => vec![Vec::new(); self.topo.minipod_count()],
        }
    }

    fn per_pod(&self, keep: impl Fn(NodeStatus) -> bool) -> Vec<Vec<NodeId>> {
        self.topo
            .minipods()
            .iter()
            .map(|pod| {
                pod.nodes()
                    .filter(|n| keep(self.state.statuses()[n.index()]))
                    .collect()
            })
            .collect()
    }

    fn start(&mut self, job: TraceJob, nodes: Vec<NodeId>, now: u64) {
        let mut transitions = Vec::with_capacity(nodes.len() * 2);
        for &n in &nodes {
            if !self.state.statuses()[n.index()].is_free() {
                transitions.push((n, NodeStatus::Free));
            }
            transitions.push((n, NodeStatus::Occupied(job.id)));
        }
        self.state
            .apply(&transitions)
            .expect("chosen nodes are free or idle in the zone");
        self.next_run += 1;
        self.running.insert(
            job.id,
            RunningJob {
                job,
                nodes,
                start: now,
                run: self.next_run,
            },
        );
    }

    /// Releases a finished job. Returns the LPJ placement if this release
    /// was the last thing the LPJ was waiting for.
    pub fn complete(&mut self, job: JobId, now: u64) -> Result<Option<Placed>, QueueError> {
        let run = self
            .running
            .remove(&job)
            .ok_or(QueueError::NotRunning(job))?;
        self.release(&run.nodes);
        Ok(self.try_start_lpj(now))
    }

    /// Frees nodes, routing zone nodes back to the LPJ.
    fn release(&mut self, nodes: &[NodeId]) {
        let mut transitions = Vec::with_capacity(nodes.len() * 2);
        for &n in nodes {
            transitions.push((n, NodeStatus::Free));
            if let Some(p) = &self.lpj {
                if p.zone.contains(n) {
                    let next = if p.arrived {
                        NodeStatus::Occupied(p.job.id)
                    } else {
                        NodeStatus::Reserved(p.job.id)
                    };
                    transitions.push((n, next));
                }
            }
        }
        self.state
            .apply(&transitions)
            .expect("running jobs own their nodes");
    }

    fn try_start_lpj(&mut self, now: u64) -> Option<Placed> {
        let p = self.lpj.as_ref()?;
        let id = p.job.id;
        let ready = p.arrived
            && p.zone
                .nodes
                .iter()
                .all(|n| self.state.statuses()[n.index()] == NodeStatus::Occupied(id));
        if !ready {
            return None;
        }
        let p = self.lpj.take().expect("checked above");
        let nodes = p.zone.nodes.clone();
        self.next_run += 1;
        self.running.insert(
            id,
            RunningJob {
                job: p.job,
                nodes: nodes.clone(),
                start: now,
                run: self.next_run,
            },
        );
        Some(Placed {
            job: id,
            nodes,
            branch: Branch::Lpj,
        })
    }

    /// The LPJ arrives: preemptible jobs on zone nodes are evicted and
    /// re-queued, idle zone nodes are taken, and non-preemptible jobs still
    /// on zone nodes are reported. Those nodes pass to the LPJ on release.
    pub fn lpj_arrival(&mut self, now: u64) -> Result<Arrival, QueueError> {
        let p = self.lpj.as_mut().ok_or(QueueError::NoZone)?;
        p.arrived = true;
        let id = p.job.id;
        let zone_nodes = p.zone.nodes.clone();

        let mut occupants: BTreeMap<JobId, Vec<NodeId>> = BTreeMap::new();
        let mut take = Vec::new();
        for &n in &zone_nodes {
            match self.state.statuses()[n.index()] {
                NodeStatus::Reserved(_) => {
                    take.push((n, NodeStatus::Occupied(id)));
                }
                NodeStatus::Occupied(j) => occupants.entry(j).or_default().push(n),
                NodeStatus::Free => unreachable!("zone nodes are never plain free"),
            }
        }
        self.state.apply(&take)?;

        let mut out = Arrival::default();
        for (job, nodes) in occupants {
            if self.is_preemptable(job) {
                let run = self.running.remove(&job).expect("occupant is running");
                self.release(&run.nodes);
                self.queue.push(run.job);
                out.preempted.push(job);
            } else {
                log::warn!(
                    "{job} still holds {} zone nodes at LPJ arrival",
                    nodes.len()
                );
                out.violations.push(Violation { job, nodes });
            }
        }
        out.started = self.try_start_lpj(now);
        Ok(out)
    }

    pub fn allocation_rate(&self) -> f64 {
        allocation_rate(&self.state)
    }

    /// Zero when no reservation is active.
    pub fn retention_rate(&self) -> f64 {
        match &self.lpj {
            Some(p) => retention_rate(&p.zone, &self.state, |j| self.is_preemptable(j)),
            None => 0.0,
        }
    }
}

/// Default bin-pack: the tightest minipod that holds the whole job, else
/// the largest minipods first. Takes each minipod's first listed nodes.
pub fn bin_pack(pool: &[Vec<NodeId>], n: usize) -> Option<Vec<NodeId>> {
    let total: usize = pool.iter().map(Vec::len).sum();
    if n == 0 || n > total {
        return None;
    }
    let mut nodes = match (0..pool.len())
        .filter(|&j| pool[j].len() >= n)
        .min_by_key(|&j| (pool[j].len(), j))
    {
        Some(j) => pool[j][..n].to_vec(),
        None => {
            let mut order: Vec<usize> = (0..pool.len()).collect();
            order.sort_by_key(|&j| (Reverse(pool[j].len()), j));
            order
                .into_iter()
                .flat_map(|j| pool[j].iter().copied())
                .take(n)
                .collect()
        }
    };
    nodes.sort_unstable();
    Some(nodes)
}

/// Node ids of `zone` as a set, for quick membership tests by callers.
pub fn zone_set(zone: &ReservedZone) -> BTreeSet<NodeId> {
    zone.nodes.iter().copied().collect()
}
