//! Characterization profiles and affinity lookup.
//!
//! Each entry records how much a DP-aligned (`j_dp`) and a PP-aligned
//! (`j_pp`) placement sped up a profiled job, together with that job's
//! compute-to-communication ratio `r1` and DP-to-PP volume ratio `r2`.
//! A new job is matched to the nearest entry of its GPU type in `(r1, r2)`
//! space and inherits `α = j_dp/(j_dp+j_pp)`, `β = j_pp/(j_dp+j_pp)`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{JobSpec, WorkloadError};

const SEED_PROFILES: &str = include_str!("../../data/profiles.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub gpu_type: String,
    pub tag: String,
    pub r1: f64,
    pub r2: f64,
    /// Percent improvement of the DP-aligned placement.
    pub j_dp: f64,
    /// Percent improvement of the PP-aligned placement.
    pub j_pp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ProfileEntry {
    pub fn affinity(&self) -> Affinity {
        let total = self.j_dp + self.j_pp;
        Affinity {
            alpha: self.j_dp / total,
            beta: self.j_pp / total,
        }
    }
}

/// DP-spread weight `alpha` and PP-spread weight `beta`, summing to one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affinity {
    pub alpha: f64,
    pub beta: f64,
}

impl Affinity {
    pub fn from_alpha(alpha: f64) -> Self {
        Affinity {
            alpha,
            beta: 1.0 - alpha,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Ratios {
    /// `mb·v_w / (v_d + v_p)` with `v_w` in bytes.
    pub r1: f64,
    /// `v_d / v_p`.
    pub r2: f64,
}

/// Compute-to-communication and DP-to-PP ratios of a job.
pub fn compute_ratios(spec: &JobSpec) -> Result<Ratios, WorkloadError> {
    if spec.pp <= 1 {
        return Err(WorkloadError::UndefinedRatio);
    }
    let v = spec.volume_vector()?;
    let weight_bytes = v.weight_elems * f64::from(spec.bytes_per_element);
    Ok(Ratios {
        r1: spec.mb as f64 * weight_bytes / (v.dp_bytes + v.pp_bytes),
        r2: v.dp_bytes / v.pp_bytes,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProfileDb {
    pub entries: Vec<ProfileEntry>,
}

impl ProfileDb {
    /// Database shipped with the crate.
    pub fn seeded() -> Self {
        serde_json::from_str(SEED_PROFILES).expect("bundled profile database parses")
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, WorkloadError> {
        let db: ProfileDb = serde_json::from_str(&fs::read_to_string(path)?)?;
        db.validate()?;
        Ok(db)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), WorkloadError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        for (index, e) in self.entries.iter().enumerate() {
            let bad = |reason| WorkloadError::BadProfile {
                index,
                tag: e.tag.clone(),
                reason,
            };
            if !(e.j_dp >= 0.0 && e.j_pp >= 0.0) {
                return Err(bad("improvements must be non-negative"));
            }
            if e.j_dp + e.j_pp <= 0.0 {
                return Err(bad("j_dp + j_pp must be positive"));
            }
            if !(e.r1.is_finite() && e.r2.is_finite()) {
                return Err(bad("ratios must be finite"));
            }
        }
        Ok(())
    }

    pub fn add(&mut self, entry: ProfileEntry) -> Result<(), WorkloadError> {
        self.entries.push(entry);
        if let Err(e) = self.validate() {
            self.entries.pop();
            return Err(e);
        }
        Ok(())
    }

    /// Distinct GPU types in first-seen order.
    pub fn gpu_types(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.gpu_type) {
                out.push(e.gpu_type.clone());
            }
        }
        out
    }
}

/// Nearest entry of `gpu_type` by Euclidean distance in `(r1, r2)`; ties go
/// to the lowest entry index. Returns the entry index and its affinity.
pub fn lookup_affinity(
    db: &ProfileDb,
    gpu_type: &str,
    r1: f64,
    r2: f64,
) -> Result<(usize, Affinity), WorkloadError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, e) in db.entries.iter().enumerate() {
        if e.gpu_type != gpu_type {
            continue;
        }
        let d = ((r1 - e.r1).powi(2) + (r2 - e.r2).powi(2)).sqrt();
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    match best {
        Some((i, _)) => {
            let entry = &db.entries[i];
            if entry.j_dp + entry.j_pp <= 0.0 {
                return Err(WorkloadError::BadProfile {
                    index: i,
                    tag: entry.tag.clone(),
                    reason: "j_dp + j_pp must be positive",
                });
            }
            Ok((i, entry.affinity()))
        }
        None => Err(WorkloadError::UnknownGpuType {
            gpu_type: gpu_type.to_string(),
            available: db.gpu_types(),
        }),
    }
}
