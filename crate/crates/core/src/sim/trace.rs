//! Synthetic trace generation and JSON-lines trace files.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric, LogNormal};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::queue::{JobKind, TraceJob};
use crate::topology::JobId;
use crate::workload::JobSpec;

/// An LPJ to insert into a generated trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpjInsert {
    pub spec: JobSpec,
    /// Nodes the spec occupies.
    pub nodes: usize,
    pub announce_at: u64,
    /// Seconds between announcement and arrival.
    pub lead_time: u64,
    pub duration: u64,
    #[serde(default)]
    pub priority: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceConfig {
    /// Upper bound on generic jobs.
    pub jobs: usize,
    /// Poisson arrival rate, jobs per hour. Zero yields no generic jobs.
    pub arrival_rate: f64,
    /// Mean job duration in seconds, before the `max_duration` cap.
    pub mean_duration: f64,
    /// Standard deviation of log-duration.
    pub duration_sigma: f64,
    pub max_duration: Option<u64>,
    /// Success probability of the geometric node count; mean is `1/p`.
    pub node_p: f64,
    pub max_nodes: usize,
    pub preemptable_fraction: f64,
    /// Priorities are drawn from `0..priority_levels`.
    pub priority_levels: u32,
    /// Per-team duration multipliers, rescaled to mean 1 so the overall
    /// mean duration is unchanged. Recorded as `team` metadata.
    pub teams: Vec<f64>,
    pub lpj: Option<LpjInsert>,
    pub seed: u64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            jobs: 500,
            arrival_rate: 60.0,
            mean_duration: 1800.0,
            duration_sigma: 1.0,
            max_duration: None,
            node_p: 0.25,
            max_nodes: 32,
            preemptable_fraction: 0.2,
            priority_levels: 3,
            teams: vec![0.5, 1.0, 1.5],
            lpj: None,
            seed: 0,
        }
    }
}

impl TraceConfig {
    fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if !(self.arrival_rate >= 0.0 && self.arrival_rate.is_finite()) {
            return bad("arrival_rate must be finite and non-negative");
        }
        if !(self.mean_duration > 0.0 && self.mean_duration.is_finite()) {
            return bad("mean_duration must be positive");
        }
        if !(self.duration_sigma >= 0.0 && self.duration_sigma.is_finite()) {
            return bad("duration_sigma must be non-negative");
        }
        if !(self.node_p > 0.0 && self.node_p <= 1.0) {
            return bad("node_p must lie in (0, 1]");
        }
        if self.max_nodes == 0 {
            return bad("max_nodes must be positive");
        }
        if !(0.0..=1.0).contains(&self.preemptable_fraction) {
            return bad("preemptable_fraction must lie in [0, 1]");
        }
        if self.priority_levels == 0 {
            return bad("priority_levels must be positive");
        }
        if self.teams.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return bad("team multipliers must be positive");
        }
        if self.max_duration == Some(0) {
            return bad("max_duration must be positive");
        }
        if let Some(l) = &self.lpj {
            if l.duration == 0 || l.nodes == 0 {
                return bad("LPJ needs positive duration and nodes");
            }
        }
        Ok(())
    }
}

/// Seeded synthetic trace, sorted by (submit time, id). Generic jobs get ids
/// from 1; the LPJ, if any, takes the next id.
pub fn generate_trace(config: &TraceConfig) -> Result<Vec<TraceJob>, SimError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::new();

    if config.arrival_rate > 0.0 {
        let gap = Exp::new(config.arrival_rate / 3600.0).expect("positive rate");
        let sigma = config.duration_sigma;
        let mu = config.mean_duration.ln() - sigma * sigma / 2.0;
        let duration = LogNormal::new(mu, sigma).expect("finite parameters");
        let extra_nodes = Geometric::new(config.node_p).expect("p in (0, 1]");
        let teams = if config.teams.is_empty() {
            vec![1.0]
        } else {
            config.teams.clone()
        };
        let mean_mult = teams.iter().sum::<f64>() / teams.len() as f64;

        let mut clock = 0.0;
        for i in 0..config.jobs {
            clock += gap.sample(&mut rng);
            let team = rng.random_range(0..teams.len());
            let raw = duration.sample(&mut rng) * teams[team] / mean_mult;
            let mut secs = (raw.round() as u64).max(1);
            if let Some(cap) = config.max_duration {
                secs = secs.min(cap);
            }
            let nodes = (1 + extra_nodes.sample(&mut rng) as usize).min(config.max_nodes);
            let preemptable = rng.random_bool(config.preemptable_fraction);
            let priority = i64::from(rng.random_range(0..config.priority_levels));
            let mut metadata = BTreeMap::new();
            metadata.insert("team".to_string(), format!("t{team}"));
            metadata.insert("nodes".to_string(), nodes.to_string());
            out.push(TraceJob {
                id: JobId(i as u64 + 1),
                submit_time: clock.floor() as u64,
                duration: secs,
                nodes,
                priority,
                preemptable,
                kind: JobKind::Generic,
                metadata,
            });
        }
    }

    if let Some(l) = &config.lpj {
        out.push(TraceJob {
            id: JobId(out.len() as u64 + 1),
            submit_time: l.announce_at,
            duration: l.duration,
            nodes: l.nodes,
            priority: l.priority,
            preemptable: false,
            kind: JobKind::Lpj {
                spec: l.spec.clone(),
                arrival_time: l.announce_at + l.lead_time,
            },
            metadata: BTreeMap::new(),
        });
    }
    out.sort_by_key(|j| (j.submit_time, j.id));
    Ok(out)
}

pub fn write_trace<W: Write>(mut out: W, trace: &[TraceJob]) -> Result<(), SimError> {
    for j in trace {
        serde_json::to_writer(&mut out, j)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads JSON lines, skipping blank ones. Errors carry 1-based line numbers.
pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<TraceJob>, SimError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let job = serde_json::from_str(&line).map_err(|e| SimError::TraceLine {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(job);
    }
    Ok(out)
}
