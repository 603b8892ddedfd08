//! Placement benchmark: every (setting, algorithm, alpha) cell on an empty
//! cluster, scored by weighted max-spread with `beta = 1 - alpha`.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::baselines::{
    best_fit, enumerate_optimal_with, gpu_packing, random_fit, topo_aware, BaselineError,
    EnumerationConfig, DEFAULT_ENUMERATION_CAP,
};
use crate::metrics::{weighted_spread, Placement};
use crate::solver::{schedule, NodePool, SchedulingUnit, SolveStatus, SolverConfig};
use crate::topology::{AllocationState, ClusterTopology, TopologySpec};
use crate::workload::{build_comm_matrix_for, Affinity, CommMatrix, JobSpec};

pub const DEFAULT_ALPHAS: [f64; 4] = [0.0, 0.1, 0.3, 0.5];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Arnold,
    BestFit,
    Random,
    GpuPack,
    TopoAware,
    Enum,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Arnold,
        Algorithm::BestFit,
        Algorithm::Random,
        Algorithm::GpuPack,
        Algorithm::TopoAware,
        Algorithm::Enum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Arnold => "arnold",
            Algorithm::BestFit => "bestfit",
            Algorithm::Random => "random",
            Algorithm::GpuPack => "gpupack",
            Algorithm::TopoAware => "topoaware",
            Algorithm::Enum => "enum",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                format!(
                    "unknown algorithm {s:?}, expected one of {}",
                    names.join(", ")
                )
            })
    }
}

/// Minipod node counts; racks are cut at `rack_size`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingTopology {
    pub minipod_sizes: Vec<usize>,
    #[serde(default = "default_rack")]
    pub rack_size: usize,
}

fn default_rack() -> usize {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSetting {
    pub name: String,
    pub topology: SettingTopology,
    pub job: JobSpec,
}

impl BenchSetting {
    pub fn build(&self) -> Result<(ClusterTopology, CommMatrix), SimError> {
        let spec = TopologySpec::from_minipod_sizes(
            self.name.clone(),
            &self.topology.minipod_sizes,
            self.topology.rack_size,
        );
        let topo = ClusterTopology::build(&spec)
            .map_err(|e| SimError::Settings(format!("{}: {e}", self.name)))?;
        let matrix = build_comm_matrix_for(&self.job, u64::from(topo.gpus_per_node))
            .map_err(|e| SimError::Settings(format!("{}: {e}", self.name)))?;
        Ok((topo, matrix))
    }
}

pub fn load_settings(path: impl AsRef<Path>) -> Result<Vec<BenchSetting>, SimError> {
    let text = std::fs::read_to_string(path)?;
    let settings: Vec<BenchSetting> = serde_json::from_str(&text)?;
    for s in &settings {
        s.build()?;
    }
    Ok(settings)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub algorithms: Vec<Algorithm>,
    pub alphas: Vec<f64>,
    pub unit: SchedulingUnit,
    pub solver: SolverConfig,
    /// Search-space cap for enumeration; `None` removes it.
    pub enumeration_cap: Option<f64>,
    /// Seed for random fit.
    pub seed: u64,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            algorithms: Algorithm::ALL.to_vec(),
            alphas: DEFAULT_ALPHAS.to_vec(),
            unit: SchedulingUnit::Row,
            solver: SolverConfig::default(),
            enumeration_cap: Some(DEFAULT_ENUMERATION_CAP),
            seed: 0,
            threads: 0,
        }
    }
}

/// One CSV row. `score` is empty when the cell failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub setting: String,
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub beta: f64,
    pub score: Option<f64>,
    pub latency_ms: f64,
    pub status: String,
    pub detail: String,
}

/// Runs every cell; failures are recorded in the row and do not stop the run.
/// Rows come back in (setting, algorithm, alpha) order whatever the thread
/// count.
pub fn benchmark(
    settings: &[BenchSetting],
    config: &BenchConfig,
) -> Result<Vec<BenchRow>, SimError> {
    let built: Vec<_> = settings
        .iter()
        .map(|s| s.build().map(|b| (s, b)))
        .collect::<Result<_, _>>()?;
    let cells: Vec<_> = built
        .iter()
        .flat_map(|(s, b)| {
            config
                .algorithms
                .iter()
                .flat_map(move |&a| config.alphas.iter().map(move |&alpha| (*s, b, a, alpha)))
        })
        .collect();
    let run = || {
        cells
            .par_iter()
            .map(|&(s, (topo, matrix), a, alpha)| run_cell(&s.name, topo, matrix, a, alpha, config))
            .collect::<Vec<_>>()
    };
    if config.threads == 0 {
        Ok(run())
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| SimError::Settings(e.to_string()))?;
        Ok(pool.install(run))
    }
}

/// Places the job with `algorithm` on an empty cluster and scores it.
pub fn run_cell(
    setting: &str,
    topo: &ClusterTopology,
    matrix: &CommMatrix,
    algorithm: Algorithm,
    alpha: f64,
    config: &BenchConfig,
) -> BenchRow {
    let beta = 1.0 - alpha;
    let state = AllocationState::new(topo);
    let started = Instant::now();
    let placed: Result<(Placement, &str), String> = match algorithm {
        Algorithm::Arnold => {
            let pool = NodePool::available(topo, &state, None);
            schedule(
                matrix,
                topo,
                &pool,
                Affinity::from_alpha(alpha),
                config.unit,
                &config.solver,
            )
            .map(|s| {
                let status = match s.solution.status {
                    SolveStatus::Optimal => "optimal",
                    SolveStatus::FeasibleTimeLimit => "feasible_time_limit",
                    SolveStatus::Infeasible => "infeasible",
                };
                (s.placement, status)
            })
            .map_err(|e| e.to_string())
        }
        Algorithm::BestFit => ok(best_fit(matrix, topo, &state)),
        Algorithm::Random => ok(random_fit(matrix, topo, &state, config.seed)),
        Algorithm::GpuPack => ok(gpu_packing(matrix, topo, &state)),
        Algorithm::TopoAware => ok(topo_aware(matrix, topo, &state)),
        Algorithm::Enum => {
            let cfg = EnumerationConfig {
                unit: config.unit,
                cap: config.enumeration_cap,
            };
            match enumerate_optimal_with(matrix, topo, &state, alpha, beta, &cfg) {
                Ok(e) => Ok((e.placement, "optimal")),
                Err(e @ BaselineError::EnumerationCap { .. }) => Err(format!("cap: {e}")),
                Err(e) => Err(e.to_string()),
            }
        }
    };
    let latency_ms = started.elapsed().as_secs_f64() * 1e3;
    let (score, status, detail) = match placed {
        Ok((p, status)) => match weighted_spread(&p, matrix, alpha, beta) {
            Ok(s) => (Some(s), status.to_string(), String::new()),
            Err(e) => (None, "error".to_string(), e.to_string()),
        },
        Err(e) => match e.strip_prefix("cap: ") {
            Some(rest) => (None, "cap".to_string(), rest.to_string()),
            None => (None, "error".to_string(), e),
        },
    };
    BenchRow {
        setting: setting.to_string(),
        algorithm,
        alpha,
        beta,
        score,
        latency_ms,
        status,
        detail,
    }
}

fn ok(r: Result<Placement, BaselineError>) -> Result<(Placement, &'static str), String> {
    r.map(|p| (p, "ok")).map_err(|e| e.to_string())
}

/// CSV with a header row, also when `rows` is empty.
pub fn write_bench_csv<W: Write>(out: W, rows: &[BenchRow]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record([
            "setting",
            "algorithm",
            "alpha",
            "beta",
            "score",
            "latency_ms",
            "status",
            "detail",
        ])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
