//! C interface to the placement library.
//!
//! Conventions:
//! - Every fallible call returns an `ArnoldStatus`; `ARNOLD_STATUS_OK` is zero.
//! - On failure `arnold_last_error` returns a message for the calling thread.
//! - Inputs are NUL-terminated UTF-8 JSON. Output strings are allocated here
//!   and must be released with `arnold_string_free`.
//! - Handles are opaque and released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use arnold::metrics::spread_summary;
use arnold::queue::{
    oracle_predictor, write_series_csv, OracleJct, PolicyConfig, QueueError, Scheduler, TraceJob,
};
use arnold::sim::{read_trace, replay, SimError};
use arnold::solver::{
    schedule, solve, MipInstance, NodePool, SchedulingUnit, SolveStatus, SolverConfig, SolverError,
};
use arnold::topology::{AllocationState, ClusterTopology, JobId, TopologySpec};
use arnold::workload::{
    build_comm_matrix_for, compute_ratios, lookup_affinity, Affinity, JobSpec, ProfileDb,
};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArnoldStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed JSON or a value that fails validation.
    InvalidInput = 3,
    /// Not enough free capacity for the request.
    Infeasible = 4,
    /// The time limit was hit; the output holds the best placement found.
    Timeout = 5,
    /// A call that does not fit the scheduler's current state.
    InvalidState = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArnoldUnit {
    Row = 0,
    Column = 1,
}

impl From<ArnoldUnit> for SchedulingUnit {
    fn from(u: ArnoldUnit) -> Self {
        match u {
            ArnoldUnit::Row => SchedulingUnit::Row,
            ArnoldUnit::Column => SchedulingUnit::Column,
        }
    }
}

/// A built cluster topology.
pub struct ArnoldTopology {
    topo: ClusterTopology,
}

/// A stateful queue scheduler with an oracle JCT predictor.
pub struct ArnoldScheduler {
    sched: Scheduler,
    predictor: OracleJct,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(ArnoldStatus, String);

type FfiResult<T> = Result<T, Failure>;

fn fail<T>(status: ArnoldStatus, msg: impl ToString) -> FfiResult<T> {
    Err(Failure(status, msg.to_string()))
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> FfiResult<ArnoldStatus>) -> ArnoldStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            ArnoldStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return fail(ArnoldStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|e| fail(ArnoldStatus::InvalidUtf8, format!("{what}: {e}")))
}

fn json_arg<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> FfiResult<T> {
    serde_json::from_str(text).or_else(|e| fail(ArnoldStatus::InvalidInput, format!("{what}: {e}")))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> FfiResult<()> {
    if out.is_null() {
        return fail(ArnoldStatus::NullPointer, "output pointer is null");
    }
    let c = CString::new(s).or_else(|e| fail(ArnoldStatus::Internal, e))?;
    *out = c.into_raw();
    Ok(())
}

fn to_json(v: &impl serde::Serialize) -> FfiResult<String> {
    serde_json::to_string(v).or_else(|e| fail(ArnoldStatus::Internal, e))
}

fn solver_failure(e: SolverError) -> Failure {
    let status = match e {
        SolverError::Infeasible { .. } => ArnoldStatus::Infeasible,
        _ => ArnoldStatus::InvalidInput,
    };
    Failure(status, e.to_string())
}

fn queue_failure(e: QueueError) -> Failure {
    let status = match &e {
        QueueError::InvalidJob { .. } | QueueError::NotLpj(_) | QueueError::Workload(_) => {
            ArnoldStatus::InvalidInput
        }
        QueueError::Reservation {
            source: SolverError::Infeasible { .. },
            ..
        } => ArnoldStatus::Infeasible,
        QueueError::Reservation { .. } | QueueError::Topology(_) => ArnoldStatus::Internal,
        _ => ArnoldStatus::InvalidState,
    };
    Failure(status, e.to_string())
}

fn solver_config(time_limit: f64) -> FfiResult<SolverConfig> {
    let cfg = SolverConfig {
        time_limit,
        ..SolverConfig::default()
    };
    cfg.validate().map_err(solver_failure)?;
    Ok(cfg)
}

/// Library version as a static string. Do not free.
#[no_mangle]
pub extern "C" fn arnold_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread. Do not free.
#[no_mangle]
pub extern "C" fn arnold_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn arnold_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a topology from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn arnold_topology_from_json(
    json: *const c_char,
    out: *mut *mut ArnoldTopology,
) -> ArnoldStatus {
    guard(|| {
        if out.is_null() {
            return fail(ArnoldStatus::NullPointer, "output pointer is null");
        }
        let spec: TopologySpec = json_arg(str_arg(json, "topology")?, "topology")?;
        let topo =
            ClusterTopology::build(&spec).or_else(|e| fail(ArnoldStatus::InvalidInput, e))?;
        *out = Box::into_raw(Box::new(ArnoldTopology { topo }));
        Ok(ArnoldStatus::Ok)
    })
}

/// # Safety
/// `topo` must come from `arnold_topology_from_json` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn arnold_topology_free(topo: *mut ArnoldTopology) {
    if !topo.is_null() {
        drop(Box::from_raw(topo));
    }
}

/// Node count, or 0 for null.
///
/// # Safety
/// `topo` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn arnold_topology_node_count(topo: *const ArnoldTopology) -> usize {
    topo.as_ref().map_or(0, |t| t.topo.node_count())
}

/// Minipod count, or 0 for null.
///
/// # Safety
/// `topo` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn arnold_topology_minipod_count(topo: *const ArnoldTopology) -> usize {
    topo.as_ref().map_or(0, |t| t.topo.minipod_count())
}

fn affinity_for(spec: &JobSpec, alpha: f64) -> FfiResult<Affinity> {
    if !alpha.is_nan() {
        if !(0.0..=1.0).contains(&alpha) {
            return fail(
                ArnoldStatus::InvalidInput,
                format!("alpha {alpha} outside [0, 1]"),
            );
        }
        return Ok(Affinity::from_alpha(alpha));
    }
    if spec.pp <= 1 {
        return Ok(Affinity::from_alpha(1.0));
    }
    let bad =
        |e: arnold::workload::WorkloadError| Failure(ArnoldStatus::InvalidInput, e.to_string());
    let r = compute_ratios(spec).map_err(bad)?;
    let (_, a) = lookup_affinity(&ProfileDb::seeded(), &spec.gpu_type, r.r1, r.r2).map_err(bad)?;
    Ok(a)
}

/// Places a job on an otherwise empty cluster.
///
/// `alpha` is the DP weight; pass NaN to look it up in the bundled profiles.
/// On success `*out_json` holds the placement and `*out_score` (if non-null)
/// its weighted spread. `ARNOLD_STATUS_TIMEOUT` also sets both outputs.
///
/// # Safety
/// `topo` must be a live handle, `job_json` a NUL-terminated string and
/// `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn arnold_schedule(
    topo: *const ArnoldTopology,
    job_json: *const c_char,
    alpha: f64,
    unit: ArnoldUnit,
    time_limit: f64,
    out_json: *mut *mut c_char,
    out_score: *mut f64,
) -> ArnoldStatus {
    guard(|| {
        let Some(t) = topo.as_ref() else {
            return fail(ArnoldStatus::NullPointer, "topology is null");
        };
        let spec: JobSpec = json_arg(str_arg(job_json, "job")?, "job")?;
        let matrix = build_comm_matrix_for(&spec, u64::from(t.topo.gpus_per_node))
            .or_else(|e| fail(ArnoldStatus::InvalidInput, e))?;
        let affinity = affinity_for(&spec, alpha)?;
        let cfg = solver_config(time_limit)?;
        let state = AllocationState::new(&t.topo);
        let pool = NodePool::available(&t.topo, &state, None);
        let s = schedule(&matrix, &t.topo, &pool, affinity, unit.into(), &cfg)
            .map_err(solver_failure)?;
        let score = spread_summary(&s.placement).score(affinity.alpha, affinity.beta);
        write_string(out_json, s.placement.to_json())?;
        if !out_score.is_null() {
            *out_score = score;
        }
        Ok(match s.solution.status {
            SolveStatus::FeasibleTimeLimit => ArnoldStatus::Timeout,
            _ => ArnoldStatus::Ok,
        })
    })
}

/// Solves a MIP instance given as JSON and writes the solution as JSON.
///
/// # Safety
/// `instance_json` must be a NUL-terminated string and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn arnold_solve(
    instance_json: *const c_char,
    time_limit: f64,
    out_json: *mut *mut c_char,
) -> ArnoldStatus {
    guard(|| {
        let inst: MipInstance = json_arg(str_arg(instance_json, "instance")?, "instance")?;
        let sol = solve(&inst, &solver_config(time_limit)?).map_err(solver_failure)?;
        write_string(out_json, to_json(&sol)?)?;
        Ok(match sol.status {
            SolveStatus::FeasibleTimeLimit => ArnoldStatus::Timeout,
            _ => ArnoldStatus::Ok,
        })
    })
}

/// Creates a queue scheduler over a copy of `topo`. `alpha` weights the LPJ
/// reservation; `noise` and `seed` configure the oracle JCT predictor.
///
/// # Safety
/// `topo` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn arnold_scheduler_new(
    topo: *const ArnoldTopology,
    alpha: f64,
    noise: u32,
    seed: u64,
    out: *mut *mut ArnoldScheduler,
) -> ArnoldStatus {
    guard(|| {
        let Some(t) = topo.as_ref() else {
            return fail(ArnoldStatus::NullPointer, "topology is null");
        };
        if out.is_null() {
            return fail(ArnoldStatus::NullPointer, "output pointer is null");
        }
        if !(0.0..=1.0).contains(&alpha) {
            return fail(
                ArnoldStatus::InvalidInput,
                format!("alpha {alpha} outside [0, 1]"),
            );
        }
        let config = PolicyConfig {
            alpha,
            ..PolicyConfig::default()
        };
        *out = Box::into_raw(Box::new(ArnoldScheduler {
            sched: Scheduler::new(t.topo.clone(), config),
            predictor: oracle_predictor(noise, seed),
        }));
        Ok(ArnoldStatus::Ok)
    })
}

/// # Safety
/// `s` must come from `arnold_scheduler_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn arnold_scheduler_free(s: *mut ArnoldScheduler) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

unsafe fn scheduler<'a>(s: *mut ArnoldScheduler) -> FfiResult<&'a mut ArnoldScheduler> {
    match s.as_mut() {
        Some(s) => Ok(s),
        None => fail(ArnoldStatus::NullPointer, "scheduler is null"),
    }
}

/// Queues a job (trace JSON object). An LPJ reserves its zone at once.
///
/// # Safety
/// `s` must be a live handle and `job_json` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn arnold_scheduler_submit(
    s: *mut ArnoldScheduler,
    job_json: *const c_char,
) -> ArnoldStatus {
    guard(|| {
        let s = scheduler(s)?;
        let job: TraceJob = json_arg(str_arg(job_json, "job")?, "job")?;
        s.sched.submit(job).map_err(queue_failure)?;
        Ok(ArnoldStatus::Ok)
    })
}

/// Runs one policy pass at time `now` and writes the outcome as JSON:
/// `{"scheduled": [{"job", "nodes", "branch"}], "delayed": [...]}`.
///
/// # Safety
/// `s` must be a live handle and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn arnold_scheduler_step(
    s: *mut ArnoldScheduler,
    now: u64,
    out_json: *mut *mut c_char,
) -> ArnoldStatus {
    guard(|| {
        let s = scheduler(s)?;
        let outcome = s.sched.policy_step(now, &s.predictor);
        write_string(out_json, to_json(&outcome)?)?;
        Ok(ArnoldStatus::Ok)
    })
}

/// Marks a running job finished. If this frees the last node a waiting LPJ
/// needed, `*out_json` receives its start as JSON, otherwise `null`.
/// `out_json` may be null.
///
/// # Safety
/// `s` must be a live handle; `out_json` null or writable.
#[no_mangle]
pub unsafe extern "C" fn arnold_scheduler_complete(
    s: *mut ArnoldScheduler,
    job: u64,
    now: u64,
    out_json: *mut *mut c_char,
) -> ArnoldStatus {
    guard(|| {
        let s = scheduler(s)?;
        let started = s.sched.complete(JobId(job), now).map_err(queue_failure)?;
        if !out_json.is_null() {
            write_string(out_json, to_json(&started)?)?;
        }
        Ok(ArnoldStatus::Ok)
    })
}

/// Handles the LPJ's arrival: evicts preemptible jobs from its zone and
/// reports violations, as JSON `{"preempted", "violations", "started"}`.
///
/// # Safety
/// `s` must be a live handle and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn arnold_scheduler_lpj_arrival(
    s: *mut ArnoldScheduler,
    now: u64,
    out_json: *mut *mut c_char,
) -> ArnoldStatus {
    guard(|| {
        let s = scheduler(s)?;
        let arrival = s.sched.lpj_arrival(now).map_err(queue_failure)?;
        write_string(out_json, to_json(&arrival)?)?;
        Ok(ArnoldStatus::Ok)
    })
}

/// Current allocation and retention rates. Either output may be null.
///
/// # Safety
/// `s` must be a live handle; outputs null or writable.
#[no_mangle]
pub unsafe extern "C" fn arnold_scheduler_rates(
    s: *const ArnoldScheduler,
    allocation: *mut f64,
    retention: *mut f64,
) -> ArnoldStatus {
    guard(|| {
        let Some(s) = s.as_ref() else {
            return fail(ArnoldStatus::NullPointer, "scheduler is null");
        };
        if !allocation.is_null() {
            *allocation = s.sched.allocation_rate();
        }
        if !retention.is_null() {
            *retention = s.sched.retention_rate();
        }
        Ok(ArnoldStatus::Ok)
    })
}

/// Replays a JSON-lines trace and writes the per-pass time series as CSV.
///
/// # Safety
/// `topo` must be a live handle, `trace_jsonl` a NUL-terminated string and
/// `out_csv` writable.
#[no_mangle]
pub unsafe extern "C" fn arnold_simulate(
    topo: *const ArnoldTopology,
    trace_jsonl: *const c_char,
    alpha: f64,
    noise: u32,
    seed: u64,
    out_csv: *mut *mut c_char,
) -> ArnoldStatus {
    guard(|| {
        let Some(t) = topo.as_ref() else {
            return fail(ArnoldStatus::NullPointer, "topology is null");
        };
        if !(0.0..=1.0).contains(&alpha) {
            return fail(
                ArnoldStatus::InvalidInput,
                format!("alpha {alpha} outside [0, 1]"),
            );
        }
        let text = str_arg(trace_jsonl, "trace")?;
        let sim_failure = |e: SimError| {
            let status = match e {
                SimError::Queue(q) => return queue_failure(q),
                SimError::Io(_) | SimError::Csv(_) => ArnoldStatus::Internal,
                _ => ArnoldStatus::InvalidInput,
            };
            Failure(status, e.to_string())
        };
        let trace = read_trace(text.as_bytes()).map_err(sim_failure)?;
        let config = PolicyConfig {
            alpha,
            ..PolicyConfig::default()
        };
        let result = replay(&trace, &t.topo, &config, &oracle_predictor(noise, seed))
            .map_err(sim_failure)?;
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &result.series).or_else(|e| fail(ArnoldStatus::Internal, e))?;
        write_string(
            out_csv,
            String::from_utf8(buf).or_else(|e| fail(ArnoldStatus::Internal, e))?,
        )?;
        Ok(ArnoldStatus::Ok)
    })
}
