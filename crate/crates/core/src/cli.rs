//! Command-line front end. Exit codes: 0 success, 1 infeasible or timed
//! out, 2 usage or I/O error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::baselines::{
    best_fit, enumerate_optimal_with, gpu_packing, random_fit, topo_aware, BaselineError,
    EnumerationConfig, DEFAULT_ENUMERATION_CAP,
};
use crate::metrics::{spread_summary, Placement};
use crate::queue::{
    histogram_predictor, oracle_predictor, write_series_csv, JctPredictor, PolicyConfig,
};
use crate::sim::{
    benchmark, generate_trace, load_settings, read_trace, replay, write_bench_csv, write_trace,
    Algorithm, BenchConfig, SimError, TraceConfig,
};
use crate::solver::{
    schedule, solve, MipInstance, NodePool, SchedulingUnit, SolveStatus, SolverConfig, SolverError,
};
use crate::topology::{AllocationState, ClusterTopology, TopologyError};
use crate::workload::{
    build_comm_matrix_for, compute_ratios, lookup_affinity, Affinity, JobSpec, ProfileDb,
    ProfileEntry, WorkloadError,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("time limit reached before optimality was proven")]
    Timeout,
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Solver(SolverError),
    #[error(transparent)]
    Baseline(BaselineError),
    #[error(transparent)]
    Sim(SimError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Infeasible(_) | CliError::Timeout => 1,
            _ => 2,
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Infeasible { .. } => CliError::Infeasible(e.to_string()),
            other => CliError::Solver(other),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::Capacity { .. } => CliError::Infeasible(e.to_string()),
            BaselineError::EnumerationCap { .. } => CliError::Infeasible(e.to_string()),
            other => CliError::Baseline(other),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Io(e) => CliError::Io(e),
            other => CliError::Sim(other),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "arnold",
    version,
    about = "Topology-aware placement for LLM pre-training jobs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Place one job on an empty cluster and print its placement.
    Schedule(ScheduleArgs),
    /// Score every algorithm on a list of settings.
    Benchmark(BenchmarkArgs),
    /// Replay a job trace through the queueing policy.
    Simulate(SimulateArgs),
    /// Solve a MIP instance given as JSON.
    Solve(SolveArgs),
    /// Inspect or extend a profile database.
    Profiles(ProfilesArgs),
    /// Write a synthetic job trace.
    GenTrace(GenTraceArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum UnitArg {
    Row,
    Col,
}

impl From<UnitArg> for SchedulingUnit {
    fn from(u: UnitArg) -> Self {
        match u {
            UnitArg::Row => SchedulingUnit::Row,
            UnitArg::Col => SchedulingUnit::Column,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Arnold,
    Bestfit,
    Random,
    Gpupack,
    Topoaware,
    Enum,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Arnold => Algorithm::Arnold,
            AlgorithmArg::Bestfit => Algorithm::BestFit,
            AlgorithmArg::Random => Algorithm::Random,
            AlgorithmArg::Gpupack => Algorithm::GpuPack,
            AlgorithmArg::Topoaware => Algorithm::TopoAware,
            AlgorithmArg::Enum => Algorithm::Enum,
        }
    }
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub topology: PathBuf,
    #[arg(long)]
    pub job: PathBuf,
    /// Profile database; the bundled one when omitted.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// DP weight; skips the profile lookup. The PP weight is 1 - alpha.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum, default_value = "row")]
    pub unit: UnitArg,
    #[arg(long, value_enum, default_value = "arnold")]
    pub algorithm: AlgorithmArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Solver time limit in seconds.
    #[arg(long, default_value_t = 10.0)]
    pub time_limit: f64,
    /// Placement JSON destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub settings: PathBuf,
    /// Comma-separated; all algorithms when omitted. An empty value gives a
    /// header-only CSV.
    #[arg(long, value_delimiter = ',')]
    pub algorithms: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "row")]
    pub unit: UnitArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10.0)]
    pub time_limit: f64,
    /// Search-space cap for enumeration; 0 removes it.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    pub enum_cap: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for independent cells; 0 picks automatically.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PredictorArg {
    Oracle,
    Histogram,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub topology: PathBuf,
    /// DP weight used to plan LPJ reservations.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "row")]
    pub unit: UnitArg,
    #[arg(long, value_enum, default_value = "oracle")]
    pub predictor: PredictorArg,
    /// Oracle jitter in buckets.
    #[arg(long, default_value_t = 0)]
    pub noise: u32,
    /// Training trace for the histogram predictor.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seconds between policy passes.
    #[arg(long, default_value_t = 30)]
    pub interval: u64,
    #[arg(long, default_value_t = 10.0)]
    pub time_limit: f64,
    /// Time-series CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Event log (JSON lines) destination.
    #[arg(long)]
    pub events: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    pub time_limit: f64,
    #[arg(long)]
    pub node_limit: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProfilesArgs {
    /// Database file; the bundled one when omitted (read-only).
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[command(subcommand)]
    pub action: ProfilesAction,
}

#[derive(Debug, Subcommand)]
pub enum ProfilesAction {
    /// Print every entry.
    List,
    /// Append an entry given as JSON and save the database.
    Add {
        #[arg(long)]
        entry: String,
    },
    /// Nearest entry of a GPU type, by ratios or by a job file.
    Match {
        #[arg(long)]
        gpu_type: String,
        #[arg(long, requires = "r2", conflicts_with = "job")]
        r1: Option<f64>,
        #[arg(long, requires = "r1")]
        r2: Option<f64>,
        #[arg(long)]
        job: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct GenTraceArgs {
    /// Trace configuration JSON; defaults for any missing field.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Arrivals per hour.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Schedule(a) => cmd_schedule(&a),
        Command::Benchmark(a) => cmd_benchmark(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Profiles(a) => cmd_profiles(&a),
        Command::GenTrace(a) => cmd_gen_trace(&a),
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|source| {
            CliError::File {
                path: p.to_path_buf(),
                source,
            }
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "--alpha must lie in [0, 1], got {alpha}"
        )))
    }
}

fn solver_config(time_limit: f64) -> Result<SolverConfig, CliError> {
    let cfg = SolverConfig {
        time_limit,
        ..SolverConfig::default()
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

/// Affinity for a job: the override if given; otherwise `alpha = 1` for jobs
/// without pipeline stages, else the nearest profile of the job's GPU type.
pub fn job_affinity(
    spec: &JobSpec,
    db: &ProfileDb,
    alpha: Option<f64>,
) -> Result<(Affinity, String), CliError> {
    if let Some(a) = alpha {
        check_alpha(a)?;
        return Ok((Affinity::from_alpha(a), "override".into()));
    }
    if spec.pp <= 1 {
        return Ok((Affinity::from_alpha(1.0), "pp=1".into()));
    }
    let ratios = compute_ratios(spec)?;
    let (i, affinity) = lookup_affinity(db, &spec.gpu_type, ratios.r1, ratios.r2)?;
    Ok((affinity, format!("profile:{}", db.entries[i].tag)))
}

fn load_profiles(path: Option<&Path>) -> Result<ProfileDb, CliError> {
    match path {
        Some(p) => {
            read_file(p)?;
            Ok(ProfileDb::from_path(p)?)
        }
        None => Ok(ProfileDb::seeded()),
    }
}

fn load_topology(path: &Path) -> Result<ClusterTopology, CliError> {
    read_file(path)?;
    Ok(ClusterTopology::from_path(path)?)
}

fn cmd_schedule(a: &ScheduleArgs) -> Result<(), CliError> {
    let topo = load_topology(&a.topology)?;
    let spec: JobSpec = parse_json(&a.job)?;
    let matrix = build_comm_matrix_for(&spec, u64::from(topo.gpus_per_node))?;
    let db = load_profiles(a.profiles.as_deref())?;
    let (affinity, source) = job_affinity(&spec, &db, a.alpha)?;
    let cfg = solver_config(a.time_limit)?;
    let state = AllocationState::new(&topo);
    log::info!(
        "{}x{} matrix, alpha={} beta={} ({source})",
        matrix.rows,
        matrix.cols,
        affinity.alpha,
        affinity.beta
    );

    let started = Instant::now();
    let mut timed_out = false;
    let placement: Placement = match a.algorithm {
        AlgorithmArg::Arnold => {
            let pool = NodePool::available(&topo, &state, None);
            let s = schedule(&matrix, &topo, &pool, affinity, a.unit.into(), &cfg)?;
            timed_out = s.solution.status == SolveStatus::FeasibleTimeLimit;
            s.placement
        }
        AlgorithmArg::Bestfit => best_fit(&matrix, &topo, &state)?,
        AlgorithmArg::Random => random_fit(&matrix, &topo, &state, a.seed)?,
        AlgorithmArg::Gpupack => gpu_packing(&matrix, &topo, &state)?,
        AlgorithmArg::Topoaware => topo_aware(&matrix, &topo, &state)?,
        AlgorithmArg::Enum => {
            let ecfg = EnumerationConfig {
                unit: a.unit.into(),
                cap: Some(DEFAULT_ENUMERATION_CAP),
            };
            enumerate_optimal_with(&matrix, &topo, &state, affinity.alpha, affinity.beta, &ecfg)?
                .placement
        }
    };
    let latency_ms = started.elapsed().as_secs_f64() * 1e3;

    let summary = spread_summary(&placement);
    let score = summary.score(affinity.alpha, affinity.beta);
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "{}", placement.to_json())?;
    out.flush()?;
    let line = format!(
        "score={score} dp_spread={} pp_spread={} minipods={} alpha={} beta={} latency_ms={latency_ms:.3}",
        summary.max_dp_spread, summary.max_pp_spread, summary.minipods_used, affinity.alpha, affinity.beta
    );
    if a.out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
    if timed_out {
        return Err(CliError::Timeout);
    }
    Ok(())
}

fn cmd_benchmark(a: &BenchmarkArgs) -> Result<(), CliError> {
    read_file(&a.settings)?;
    let settings = load_settings(&a.settings)?;
    let algorithms = match &a.algorithms {
        None => Algorithm::ALL.to_vec(),
        Some(names) => names
            .iter()
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<Algorithm>().map_err(CliError::Usage))
            .collect::<Result<_, _>>()?,
    };
    let alphas = a
        .alphas
        .clone()
        .unwrap_or_else(|| crate::sim::DEFAULT_ALPHAS.to_vec());
    for &alpha in &alphas {
        check_alpha(alpha)?;
    }
    let config = BenchConfig {
        algorithms,
        alphas,
        unit: a.unit.into(),
        solver: solver_config(a.time_limit)?,
        enumeration_cap: (a.enum_cap > 0.0).then_some(a.enum_cap),
        seed: a.seed,
        threads: a.jobs,
    };
    let rows = benchmark(&settings, &config)?;
    for r in rows.iter().filter(|r| r.score.is_none()) {
        log::warn!(
            "{}/{}/{}: {} {}",
            r.setting,
            r.algorithm,
            r.alpha,
            r.status,
            r.detail
        );
    }
    write_bench_csv(output(a.out.as_deref())?, &rows)?;
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    check_alpha(a.alpha)?;
    let topo = load_topology(&a.topology)?;
    let trace = read_trace(BufReader::new(File::open(&a.trace).map_err(|source| {
        CliError::File {
            path: a.trace.clone(),
            source,
        }
    })?))?;
    let predictor: Box<dyn JctPredictor> = match a.predictor {
        PredictorArg::Oracle => Box::new(oracle_predictor(a.noise, a.seed)),
        PredictorArg::Histogram => {
            let path = a
                .train
                .as_ref()
                .ok_or_else(|| CliError::Usage("--predictor histogram needs --train".into()))?;
            let training = read_trace(BufReader::new(File::open(path).map_err(|source| {
                CliError::File {
                    path: path.clone(),
                    source,
                }
            })?))?;
            Box::new(histogram_predictor(&training, &[]))
        }
    };
    let config = PolicyConfig {
        alpha: a.alpha,
        unit: a.unit.into(),
        solver: solver_config(a.time_limit)?,
        interval: a.interval,
    };
    let result = replay(&trace, &topo, &config, predictor.as_ref())?;
    if let Some(path) = &a.events {
        let f = File::create(path).map_err(|source| CliError::File {
            path: path.clone(),
            source,
        })?;
        result.log.write_jsonl(BufWriter::new(f))?;
    }
    write_series_csv(output(a.out.as_deref())?, &result.series)?;
    eprintln!(
        "events={} passes={} preemptions={} violations={} retention_at_arrival={} makespan={}",
        result.log.len(),
        result.series.len(),
        result.preemptions,
        result.violations.len(),
        result
            .retention_at_arrival
            .map_or_else(|| "none".to_string(), |r| r.to_string()),
        result.makespan
    );
    Ok(())
}

fn cmd_solve(a: &SolveArgs) -> Result<(), CliError> {
    let inst: MipInstance = parse_json(&a.instance)?;
    let cfg = SolverConfig {
        node_limit: a.node_limit,
        ..solver_config(a.time_limit)?
    };
    let sol = solve(&inst, &cfg)?;
    let mut out = output(a.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &sol)?;
    writeln!(out)?;
    out.flush()?;
    if sol.status == SolveStatus::FeasibleTimeLimit {
        return Err(CliError::Timeout);
    }
    Ok(())
}

fn cmd_profiles(a: &ProfilesArgs) -> Result<(), CliError> {
    let mut db = load_profiles(a.profiles.as_deref())?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match &a.action {
        ProfilesAction::List => {
            for (i, e) in db.entries.iter().enumerate() {
                let aff = e.affinity();
                writeln!(
                    out,
                    "{i}\t{}\t{}\tr1={}\tr2={}\talpha={}\tbeta={}",
                    e.gpu_type, e.tag, e.r1, e.r2, aff.alpha, aff.beta
                )?;
            }
        }
        ProfilesAction::Add { entry } => {
            let path = a
                .profiles
                .as_ref()
                .ok_or_else(|| CliError::Usage("profiles add needs --profiles FILE".into()))?;
            let entry: ProfileEntry = serde_json::from_str(entry)
                .map_err(|e| CliError::Usage(format!("--entry: {e}")))?;
            db.add(entry)?;
            db.save(path)?;
            writeln!(out, "{} entries", db.entries.len())?;
        }
        ProfilesAction::Match {
            gpu_type,
            r1,
            r2,
            job,
        } => {
            let (r1, r2) = match (r1, r2, job) {
                (Some(r1), Some(r2), _) => (*r1, *r2),
                (_, _, Some(path)) => {
                    let spec: JobSpec = parse_json(path)?;
                    let r = compute_ratios(&spec)?;
                    (r.r1, r.r2)
                }
                _ => {
                    return Err(CliError::Usage(
                        "match needs --r1 and --r2, or --job".into(),
                    ))
                }
            };
            let (i, aff) = lookup_affinity(&db, gpu_type, r1, r2)?;
            let body = serde_json::json!({
                "index": i,
                "tag": db.entries[i].tag,
                "alpha": aff.alpha,
                "beta": aff.beta,
            });
            writeln!(out, "{body}")?;
        }
    }
    Ok(())
}

fn cmd_gen_trace(a: &GenTraceArgs) -> Result<(), CliError> {
    let mut cfg: TraceConfig = match &a.config {
        Some(p) => parse_json(p)?,
        None => TraceConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.jobs {
        cfg.jobs = n;
    }
    if let Some(r) = a.rate {
        cfg.arrival_rate = r;
    }
    let trace = generate_trace(&cfg).map_err(|e| match e {
        SimError::Config(m) => CliError::Usage(m),
        other => other.into(),
    })?;
    write_trace(output(a.out.as_deref())?, &trace)?;
    Ok(())
}

/// Initializes logging from `ARNOLD_LOG` (default `warn`).
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("ARNOLD_LOG", "warn");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_subcommand() {
        for args in [
            vec![
                "arnold",
                "schedule",
                "--topology",
                "t",
                "--job",
                "j",
                "--alpha",
                "0.3",
            ],
            vec![
                "arnold",
                "benchmark",
                "--settings",
                "s",
                "--algorithms",
                "arnold,enum",
            ],
            vec![
                "arnold",
                "simulate",
                "--trace",
                "t",
                "--topology",
                "p",
                "--noise",
                "2",
            ],
            vec!["arnold", "solve", "--instance", "i"],
            vec![
                "arnold",
                "profiles",
                "match",
                "--gpu-type",
                "H800",
                "--r1",
                "1",
                "--r2",
                "2",
            ],
            vec!["arnold", "gen-trace", "--seed", "4"],
        ] {
            Cli::try_parse_from(&args).unwrap_or_else(|e| panic!("{args:?}: {e}"));
        }
    }

    #[test]
    fn usage_errors_exit_two() {
        for args in [vec!["arnold", "schedule"], vec!["arnold", "bogus"]] {
            assert_eq!(Cli::try_parse_from(&args).unwrap_err().exit_code(), 2);
        }
        let cli = Cli::try_parse_from([
            "arnold",
            "schedule",
            "--topology",
            "/nonexistent",
            "--job",
            "x",
        ])
        .unwrap();
        assert_eq!(execute(cli).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn pp_one_falls_back_to_bin_packing() {
        let mut spec = crate::queue::tests::lpj_spec(4);
        spec.pp = 1;
        spec.model.layers = 32;
        let (aff, source) = job_affinity(&spec, &ProfileDb::seeded(), None).unwrap();
        assert_eq!((aff.alpha, aff.beta), (1.0, 0.0));
        assert_eq!(source, "pp=1");
        assert!(job_affinity(&spec, &ProfileDb::seeded(), Some(1.5)).is_err());
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::Timeout.exit_code(), 1);
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        let e: CliError = SolverError::Infeasible {
            required: 3,
            available: 2,
        }
        .into();
        assert_eq!(e.exit_code(), 1);
    }
}
