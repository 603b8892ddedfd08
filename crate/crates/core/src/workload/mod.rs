//! Job representation: parallelism layout, the communication matrix, and
//! per-GPU volume vectors.
//!
//! A job of `gpus` GPUs with tensor degree `tp` and pipeline degree `pp` has
//! `dp = gpus / tp / pp` data-parallel replicas. TP stays inside a node, so
//! one node hosts `gpus_per_node / tp` consecutive DP ranks of the same
//! stage. The matrix has one row per PP group (`dp / (gpus_per_node / tp)`
//! rows) and one column per pipeline stage (`pp` columns); every cell is one
//! physical node.

pub mod profile;
pub mod volume;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::DEFAULT_GPUS_PER_NODE;

pub use profile::{compute_ratios, lookup_affinity, Affinity, ProfileDb, ProfileEntry, Ratios};
pub use volume::{dp_volume, microbatch_count, pp_volume};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("{field} must be positive")]
    NonPositive { field: &'static str },
    #[error("tp={tp} must divide the {gpus_per_node} GPUs of a node")]
    TensorDegree { tp: u64, gpus_per_node: u64 },
    #[error("gpus={gpus} is not divisible by tp*pp={tp_pp}")]
    GpusNotDivisible { gpus: u64, tp_pp: u64 },
    #[error("dp={dp} with tp={tp} does not fill whole {gpus_per_node}-GPU nodes")]
    PartialNode {
        dp: u64,
        tp: u64,
        gpus_per_node: u64,
    },
    #[error("layers={layers} is not divisible by pp={pp}")]
    LayersNotDivisible { layers: u64, pp: u64 },
    #[error("global batch {gb} is not divisible by mb*dp = {mb}*{dp}")]
    BatchNotDivisible { gb: u64, mb: u64, dp: u64 },
    #[error("dp_volume_multiplier must be positive and finite")]
    Multiplier,
    #[error("DP-to-PP ratio is undefined for pp=1 (no pipeline traffic)")]
    UndefinedRatio,
    #[error("no profile entries for gpu type {gpu_type:?}; available: {available:?}")]
    UnknownGpuType {
        gpu_type: String,
        available: Vec<String>,
    },
    #[error("profile entry {index} ({tag}): {reason}")]
    BadProfile {
        index: usize,
        tag: String,
        reason: &'static str,
    },
    #[error("profile database is empty")]
    EmptyProfiles,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Architecture {
    #[default]
    Dense,
    /// `layer_params` is the parameter count of one MoE block (all experts),
    /// used in place of the dense MLP term.
    Moe { experts: u64, layer_params: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelHyper {
    pub vocab_size: u64,
    pub seq_len: u64,
    pub hidden: u64,
    pub layers: u64,
    #[serde(default)]
    pub arch: Architecture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub gpus: u64,
    pub tp: u64,
    pub pp: u64,
    /// Virtual pipeline degree. Carried for completeness; no volume term uses it.
    #[serde(default = "one")]
    pub vp: u64,
    /// Global batch, in sequences.
    pub gb: u64,
    /// Micro-batch, in sequences.
    pub mb: u64,
    pub model: ModelHyper,
    #[serde(default)]
    pub gpu_type: String,
    #[serde(default = "two")]
    pub bytes_per_element: u32,
    /// Element width used for DP traffic; defaults to `bytes_per_element`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dp_bytes: Option<u32>,
    /// Element width used for PP traffic; defaults to `bytes_per_element`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pp_bytes: Option<u32>,
    /// Scales DP traffic, e.g. 2.0 to count both all-gather and reduce-scatter.
    #[serde(default = "unit_multiplier")]
    pub dp_volume_multiplier: f64,
}

fn one() -> u64 {
    1
}
fn two() -> u32 {
    2
}
fn unit_multiplier() -> f64 {
    1.0
}

impl JobSpec {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, WorkloadError> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn dp(&self) -> u64 {
        self.gpus / (self.tp * self.pp).max(1)
    }

    pub fn dp_element_bytes(&self) -> u32 {
        self.dp_bytes.unwrap_or(self.bytes_per_element)
    }

    pub fn pp_element_bytes(&self) -> u32 {
        self.pp_bytes.unwrap_or(self.bytes_per_element)
    }

    /// Check the parallelism layout against nodes of `gpus_per_node` GPUs.
    pub fn validate(&self, gpus_per_node: u64) -> Result<(), WorkloadError> {
        let positive = [
            ("gpus", self.gpus),
            ("tp", self.tp),
            ("pp", self.pp),
            ("vp", self.vp),
            ("gb", self.gb),
            ("mb", self.mb),
            ("gpus_per_node", gpus_per_node),
            ("model.vocab_size", self.model.vocab_size),
            ("model.seq_len", self.model.seq_len),
            ("model.hidden", self.model.hidden),
            ("model.layers", self.model.layers),
            ("bytes_per_element", u64::from(self.bytes_per_element)),
            ("dp_bytes", u64::from(self.dp_element_bytes())),
            ("pp_bytes", u64::from(self.pp_element_bytes())),
        ];
        for (field, value) in positive {
            if value == 0 {
                return Err(WorkloadError::NonPositive { field });
            }
        }
        if let Architecture::Moe {
            experts,
            layer_params,
        } = self.model.arch
        {
            if experts == 0 {
                return Err(WorkloadError::NonPositive { field: "experts" });
            }
            if layer_params == 0 {
                return Err(WorkloadError::NonPositive {
                    field: "layer_params",
                });
            }
        }
        if !(self.dp_volume_multiplier.is_finite() && self.dp_volume_multiplier > 0.0) {
            return Err(WorkloadError::Multiplier);
        }
        if !gpus_per_node.is_multiple_of(self.tp) {
            return Err(WorkloadError::TensorDegree {
                tp: self.tp,
                gpus_per_node,
            });
        }
        let tp_pp = self.tp * self.pp;
        if !self.gpus.is_multiple_of(tp_pp) {
            return Err(WorkloadError::GpusNotDivisible {
                gpus: self.gpus,
                tp_pp,
            });
        }
        let dp = self.dp();
        if !dp.is_multiple_of(gpus_per_node / self.tp) {
            return Err(WorkloadError::PartialNode {
                dp,
                tp: self.tp,
                gpus_per_node,
            });
        }
        if !self.model.layers.is_multiple_of(self.pp) {
            return Err(WorkloadError::LayersNotDivisible {
                layers: self.model.layers,
                pp: self.pp,
            });
        }
        microbatch_count(self.gb, self.mb, dp)?;
        Ok(())
    }

    /// Per-GPU volumes. Stage volumes are sharded across the `tp` GPUs of
    /// the stage.
    pub fn volume_vector(&self) -> Result<VolumeVector, WorkloadError> {
        let tp = self.tp as f64;
        let weight_elems = dp_volume(&self.model, self.pp)? / tp;
        let dp_bytes =
            weight_elems * f64::from(self.dp_element_bytes()) * self.dp_volume_multiplier;
        let pp_bytes = if self.pp > 1 {
            pp_volume(self.mb, self.model.seq_len, self.model.hidden) / tp
                * f64::from(self.pp_element_bytes())
        } else {
            0.0
        };
        Ok(VolumeVector {
            weight_elems,
            dp_bytes,
            pp_bytes,
        })
    }
}

/// `[v_w, v_d, v_p]` for one GPU.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeVector {
    /// Parameter elements held per GPU.
    pub weight_elems: f64,
    /// DP bytes per GPU per step.
    pub dp_bytes: f64,
    /// PP bytes per GPU per micro-batch (zero when pp = 1).
    pub pp_bytes: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
    /// Row-major node slot within the job.
    pub slot: usize,
    pub volume: VolumeVector,
}

/// Rows are PP groups, columns are DP groups. Groups are homogeneous, so a
/// single volume vector describes every cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommMatrix {
    pub rows: usize,
    pub cols: usize,
    pub volume: VolumeVector,
    /// Micro-batches per step.
    pub microbatches: u64,
}

impl CommMatrix {
    /// A matrix with explicit dimensions and volumes, for callers that do not
    /// derive them from a [`JobSpec`].
    pub fn with_volume(rows: usize, cols: usize, volume: VolumeVector, microbatches: u64) -> Self {
        CommMatrix {
            rows,
            cols,
            volume,
            microbatches,
        }
    }

    /// Unit volumes; handy when only the shape matters.
    pub fn shape(rows: usize, cols: usize) -> Self {
        let volume = VolumeVector {
            weight_elems: 1.0,
            dp_bytes: 1.0,
            pp_bytes: if cols > 1 { 1.0 } else { 0.0 },
        };
        Self::with_volume(rows, cols, volume, 1)
    }

    pub fn cell_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell {
        Cell {
            row,
            col,
            slot: row * self.cols + col,
            volume: self.volume,
        }
    }

    /// Cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| self.cell(r, c)))
    }
}

/// Communication matrix for nodes of the default 8 GPUs.
pub fn build_comm_matrix(spec: &JobSpec) -> Result<CommMatrix, WorkloadError> {
    build_comm_matrix_for(spec, u64::from(DEFAULT_GPUS_PER_NODE))
}

pub fn build_comm_matrix_for(
    spec: &JobSpec,
    gpus_per_node: u64,
) -> Result<CommMatrix, WorkloadError> {
    spec.validate(gpus_per_node)?;
    let dp = spec.dp();
    let rows = dp / (gpus_per_node / spec.tp);
    Ok(CommMatrix {
        rows: rows as usize,
        cols: spec.pp as usize,
        volume: spec.volume_vector()?,
        microbatches: microbatch_count(spec.gb, spec.mb, dp)?,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn job(gpus: u64, tp: u64, pp: u64) -> JobSpec {
        let dp = gpus / tp / pp;
        JobSpec {
            gpus,
            tp,
            pp,
            vp: 1,
            gb: dp * 4,
            mb: 1,
            model: ModelHyper {
                vocab_size: 32000,
                seq_len: 2048,
                hidden: 4096,
                layers: 32,
                arch: Architecture::Dense,
            },
            gpu_type: "H800".into(),
            bytes_per_element: 2,
            dp_bytes: None,
            pp_bytes: None,
            dp_volume_multiplier: 1.0,
        }
    }

    #[test]
    fn matrix_shapes() {
        let m = build_comm_matrix(&job(96, 8, 2)).unwrap();
        assert_eq!((m.rows, m.cols, m.cell_count()), (6, 2, 12));

        let m = build_comm_matrix(&job(96, 4, 2)).unwrap();
        assert_eq!((m.rows, m.cols), (6, 2));

        let m = build_comm_matrix(&job(8, 8, 1)).unwrap();
        assert_eq!((m.rows, m.cols), (1, 1));
        assert_eq!(m.volume.pp_bytes, 0.0);
    }

    #[test]
    fn matrix_errors() {
        assert!(matches!(
            build_comm_matrix(&job(100, 8, 2)),
            Err(WorkloadError::GpusNotDivisible { .. })
        ));
        // dp=1 with tp=4 leaves half a node.
        let mut j = job(8, 4, 2);
        j.gb = 1;
        assert!(matches!(
            build_comm_matrix(&j),
            Err(WorkloadError::PartialNode { .. })
        ));
        let mut j = job(64, 8, 2);
        j.tp = 3;
        assert!(matches!(
            build_comm_matrix(&j),
            Err(WorkloadError::TensorDegree { .. })
        ));
    }

    #[test]
    fn per_gpu_volumes_divide_by_tp() {
        let mut j = job(64, 8, 8);
        j.gb = 8;
        let v = j.volume_vector().unwrap();
        assert_eq!(v.weight_elems, 944_914_432.0 / 8.0);
        assert_eq!(v.dp_bytes, 944_914_432.0 / 8.0 * 2.0);
        assert_eq!(v.pp_bytes, 16_777_216.0 / 8.0 * 2.0);

        j.dp_bytes = Some(4);
        j.pp_bytes = Some(1);
        j.dp_volume_multiplier = 2.0;
        let w = j.volume_vector().unwrap();
        assert_eq!(w.dp_bytes, v.dp_bytes * 4.0);
        assert_eq!(w.pp_bytes, v.pp_bytes / 2.0);
    }

    #[test]
    fn job_spec_json_defaults() {
        let j: JobSpec = serde_json::from_str(
            r#"{"gpus":96,"tp":8,"pp":2,"gb":12,"mb":1,
                "model":{"vocab_size":32000,"seq_len":2048,"hidden":4096,"layers":32}}"#,
        )
        .unwrap();
        assert_eq!((j.vp, j.bytes_per_element), (1, 2));
        assert_eq!(j.model.arch, Architecture::Dense);
        assert_eq!(j.dp_volume_multiplier, 1.0);
        assert!(build_comm_matrix(&j).is_ok());
    }
}
