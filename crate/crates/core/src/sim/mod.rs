//! Discrete-event replay of job traces against the queueing policy.
//!
//! Time is in integer seconds. Events at the same instant are handled in
//! the order completion, LPJ arrival, submission, policy pass, with job id
//! breaking remaining ties.

mod bench;
mod trace;

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::queue::{
    Branch, JctPredictor, JobKind, Placed, PolicyConfig, QueueError, Scheduler, TickSample,
    TraceJob, Violation,
};
use crate::topology::{ClusterTopology, JobId};

pub use bench::{
    benchmark, load_settings, run_cell, write_bench_csv, Algorithm, BenchConfig, BenchRow,
    BenchSetting, SettingTopology, DEFAULT_ALPHAS,
};
pub use trace::{generate_trace, read_trace, write_trace, LpjInsert, TraceConfig};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("trace line {line}: {message}")]
    TraceLine { line: usize, message: String },
    #[error("trace is not sorted by submit time at job {0}")]
    Unsorted(JobId),
    #[error("job id {0} appears twice")]
    DuplicateJob(JobId),
    #[error("job {job} needs {nodes} nodes, cluster has {cluster}")]
    TooLarge {
        job: JobId,
        nodes: usize,
        cluster: usize,
    },
    #[error("policy interval must be positive")]
    ZeroInterval,
    #[error("invalid trace configuration: {0}")]
    Config(String),
    #[error("invalid benchmark settings: {0}")]
    Settings(String),
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Submit,
    Schedule,
    Delay,
    Complete,
    Preempt,
    LpjArrive,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EventKind::Submit => "submit",
            EventKind::Schedule => "schedule",
            EventKind::Delay => "delay",
            EventKind::Complete => "complete",
            EventKind::Preempt => "preempt",
            EventKind::LpjArrive => "lpj_arrive",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub time: u64,
    pub kind: EventKind,
    pub job: JobId,
    #[serde(default)]
    pub detail: String,
}

/// Append-only, time-ordered record of a replay.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    fn push(&mut self, time: u64, kind: EventKind, job: JobId, detail: String) {
        debug_assert!(self.events.last().is_none_or(|e| e.time <= time));
        self.events.push(Event {
            time,
            kind,
            job,
            detail,
        });
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), SimError> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }
}

/// Everything a replay produces.
#[derive(Clone, Debug, Default)]
pub struct Replay {
    pub log: EventLog,
    /// One sample per policy pass.
    pub series: Vec<TickSample>,
    pub violations: Vec<Violation>,
    /// Retention rate just before the LPJ arrival was processed.
    pub retention_at_arrival: Option<f64>,
    /// When the LPJ actually started, which is later than its arrival if
    /// stragglers held zone nodes.
    pub lpj_start: Option<u64>,
    pub preemptions: usize,
    /// Time of the last event.
    pub makespan: u64,
}

// Same-instant order; the derive on the tuple below relies on it.
const COMPLETE: u8 = 0;
const ARRIVE: u8 = 1;
const SUBMIT: u8 = 2;
const TICK: u8 = 3;

/// (time, order, job, run or trace index)
type Pending = Reverse<(u64, u8, JobId, u64)>;

/// Replays `trace` (sorted by submit time) until every job has finished.
pub fn replay(
    trace: &[TraceJob],
    topo: &ClusterTopology,
    config: &PolicyConfig,
    predictor: &dyn JctPredictor,
) -> Result<Replay, SimError> {
    check_trace(trace, topo)?;
    if config.interval == 0 {
        return Err(SimError::ZeroInterval);
    }
    let interval = config.interval;
    let mut sched = Scheduler::new(topo.clone(), config.clone());
    let mut heap: BinaryHeap<Pending> = trace
        .iter()
        .enumerate()
        .map(|(i, j)| Reverse((j.submit_time, SUBMIT, j.id, i as u64)))
        .collect();
    let mut out = Replay::default();
    let mut tick_pending = false;
    // Jobs whose current wait has already been logged.
    let mut waiting: BTreeSet<JobId> = BTreeSet::new();

    while let Some(Reverse((now, order, job, tag))) = heap.pop() {
        out.makespan = now;
        match order {
            COMPLETE => {
                let current = sched.running().get(&job).is_some_and(|r| r.run == tag);
                if !current {
                    // Stale completion of a run that was preempted.
                    continue;
                }
                let started = sched.complete(job, now)?;
                out.log.push(now, EventKind::Complete, job, String::new());
                if let Some(p) = started {
                    launch(&mut out, &mut heap, &sched, &p, now);
                }
            }
            ARRIVE => {
                out.retention_at_arrival = Some(sched.retention_rate());
                let arrival = sched.lpj_arrival(now)?;
                let held: usize = arrival.violations.iter().map(|v| v.nodes.len()).sum();
                out.log.push(
                    now,
                    EventKind::LpjArrive,
                    job,
                    format!(
                        "preempted={} violations={} held_nodes={held}",
                        arrival.preempted.len(),
                        arrival.violations.len()
                    ),
                );
                for &p in &arrival.preempted {
                    out.log
                        .push(now, EventKind::Preempt, p, format!("by={job}"));
                }
                out.preemptions += arrival.preempted.len();
                out.violations.extend(arrival.violations);
                if let Some(p) = arrival.started {
                    launch(&mut out, &mut heap, &sched, &p, now);
                }
            }
            SUBMIT => {
                let j = &trace[tag as usize];
                sched.submit(j.clone())?;
                let detail = match &j.kind {
                    JobKind::Generic => format!("nodes={}", j.nodes),
                    JobKind::Lpj { arrival_time, .. } => {
                        let zone = sched.zone().expect("reservation just made");
                        let reserved = zone
                            .nodes
                            .iter()
                            .filter(|&&n| sched.state().statuses()[n.index()].owner() == Some(j.id))
                            .count();
                        heap.push(Reverse((*arrival_time, ARRIVE, j.id, 0)));
                        format!(
                            "nodes={} reserved={reserved} pending={} arrival={arrival_time}",
                            j.nodes,
                            j.nodes - reserved
                        )
                    }
                };
                out.log.push(now, EventKind::Submit, j.id, detail);
            }
            TICK => {
                tick_pending = false;
                let queue_length = sched.queue().len();
                let step = sched.policy_step(now, predictor);
                for p in &step.scheduled {
                    waiting.remove(&p.job);
                    launch(&mut out, &mut heap, &sched, p, now);
                }
                for &d in &step.delayed {
                    if waiting.insert(d) {
                        out.log.push(now, EventKind::Delay, d, String::new());
                    }
                }
                out.series.push(TickSample {
                    time: now,
                    allocation_rate: sched.allocation_rate(),
                    retention_rate: sched.retention_rate(),
                    queue_length,
                    delayed_count: step.delayed.len(),
                });
            }
            _ => unreachable!("unknown event order {order}"),
        }
        if !tick_pending && !sched.is_idle() {
            let next = if order == TICK {
                now + interval
            } else {
                now.div_ceil(interval) * interval
            };
            heap.push(Reverse((next, TICK, JobId(0), 0)));
            tick_pending = true;
        }
    }
    debug_assert!(sched.running().is_empty());
    Ok(out)
}

fn launch(
    out: &mut Replay,
    heap: &mut BinaryHeap<Pending>,
    sched: &Scheduler,
    p: &Placed,
    now: u64,
) {
    let run = &sched.running()[&p.job];
    let branch = serde_json::to_value(p.branch).expect("plain enum");
    out.log.push(
        now,
        EventKind::Schedule,
        p.job,
        format!(
            "branch={} nodes={}",
            branch.as_str().unwrap_or_default(),
            p.nodes.len()
        ),
    );
    if p.branch == Branch::Lpj {
        out.lpj_start = Some(now);
    }
    heap.push(Reverse((now + run.job.duration, COMPLETE, p.job, run.run)));
}

fn check_trace(trace: &[TraceJob], topo: &ClusterTopology) -> Result<(), SimError> {
    let mut seen = BTreeSet::new();
    for (i, j) in trace.iter().enumerate() {
        if i > 0 && trace[i - 1].submit_time > j.submit_time {
            return Err(SimError::Unsorted(j.id));
        }
        if !seen.insert(j.id) {
            return Err(SimError::DuplicateJob(j.id));
        }
        if j.nodes > topo.node_count() {
            return Err(SimError::TooLarge {
                job: j.id,
                nodes: j.nodes,
                cluster: topo.node_count(),
            });
        }
        j.validate(topo.gpus_per_node)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::oracle_predictor;
    use crate::queue::tests::{generic, lpj};
    use crate::topology::TopologySpec;

    fn topo(pods: usize, nodes: usize) -> ClusterTopology {
        ClusterTopology::build(&TopologySpec::uniform("s", pods, nodes)).unwrap()
    }

    fn run(trace: &[TraceJob], t: &ClusterTopology) -> Replay {
        replay(trace, t, &PolicyConfig::default(), &oracle_predictor(0, 0)).unwrap()
    }

    #[test]
    fn empty_trace_gives_empty_log() {
        let r = run(&[], &topo(2, 4));
        assert!(r.log.is_empty());
        assert!(r.series.is_empty());
    }

    #[test]
    fn single_job_lifecycle() {
        let r = run(&[generic(1, 30, 100, 3)], &topo(2, 4));
        let kinds: Vec<_> = r.log.events().iter().map(|e| (e.time, e.kind)).collect();
        assert_eq!(
            kinds,
            vec![
                (30, EventKind::Submit),
                (30, EventKind::Schedule),
                (130, EventKind::Complete)
            ]
        );
    }

    #[test]
    fn submissions_wait_for_the_next_pass() {
        let r = run(&[generic(1, 31, 100, 1)], &topo(1, 2));
        let sched = r.log.of_kind(EventKind::Schedule).next().unwrap();
        assert_eq!(sched.time, 60);
        assert_eq!(r.log.of_kind(EventKind::Complete).next().unwrap().time, 160);
    }

    #[test]
    fn full_cluster_delays_then_runs() {
        let r = run(&[generic(1, 0, 100, 4), generic(2, 0, 50, 4)], &topo(1, 4));
        assert_eq!(r.log.of_kind(EventKind::Delay).count(), 1);
        let second = r.log.of_kind(EventKind::Schedule).nth(1).unwrap();
        assert_eq!((second.job, second.time), (JobId(2), 120));
    }

    #[test]
    fn lpj_runs_on_its_zone() {
        let trace = vec![
            generic(1, 0, 600, 2),
            lpj(2, 0, 3600, 4),
            generic(3, 60, 300, 2),
        ];
        let r = run(&trace, &topo(2, 4));
        assert_eq!(r.lpj_start, Some(3600));
        assert_eq!(r.retention_at_arrival, Some(0.0));
        assert!(r.violations.is_empty());
        let schedules = r.log.of_kind(EventKind::Schedule).count();
        let ends =
            r.log.of_kind(EventKind::Complete).count() + r.log.of_kind(EventKind::Preempt).count();
        assert_eq!(schedules, ends);
    }

    #[test]
    fn preempted_job_reruns() {
        let mut long = generic(1, 0, 10_000, 4);
        long.preemptable = true;
        let trace = vec![lpj(2, 0, 600, 4), long];
        let r = run(&trace, &topo(1, 4));
        assert_eq!(r.preemptions, 1);
        let runs = r
            .log
            .of_kind(EventKind::Schedule)
            .filter(|e| e.job == JobId(1))
            .count();
        assert_eq!(runs, 2);
        assert_eq!(r.log.of_kind(EventKind::Complete).count(), 2);
    }

    #[test]
    fn bad_traces_are_rejected() {
        let t = topo(1, 4);
        let cfg = PolicyConfig::default();
        let p = oracle_predictor(0, 0);
        let unsorted = [generic(1, 10, 5, 1), generic(2, 0, 5, 1)];
        assert!(matches!(
            replay(&unsorted, &t, &cfg, &p),
            Err(SimError::Unsorted(_))
        ));
        let dup = [generic(1, 0, 5, 1), generic(1, 0, 5, 1)];
        assert!(matches!(
            replay(&dup, &t, &cfg, &p),
            Err(SimError::DuplicateJob(_))
        ));
        let big = [generic(1, 0, 5, 5)];
        assert!(matches!(
            replay(&big, &t, &cfg, &p),
            Err(SimError::TooLarge { .. })
        ));
    }

    #[test]
    fn log_round_trips_as_json_lines() {
        let r = run(&[generic(1, 0, 100, 1)], &topo(1, 2));
        let text = r.log.to_jsonl();
        assert_eq!(text.lines().count(), 3);
        let back: Vec<Event> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(back, r.log.events());
        assert!(text.starts_with(r#"{"time":0,"kind":"submit","job":1"#));
    }
}
