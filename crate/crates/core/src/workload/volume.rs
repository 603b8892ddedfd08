//! Analytical per-stage communication volumes for GPT-style models.

use super::{Architecture, ModelHyper, WorkloadError};

/// Parameter elements held by one pipeline stage, which is also what a DP
/// group synchronizes each step: the embedding term `h·(V+s)` plus
/// `l/pp` transformer layers of `4h²+2h` (attention) and `8h²+7h` (dense MLP).
///
/// For MoE models the configured per-layer MoE parameter count replaces the
/// dense MLP term.
pub fn dp_volume(model: &ModelHyper, pp: u64) -> Result<f64, WorkloadError> {
    if pp == 0 || !model.layers.is_multiple_of(pp) {
        return Err(WorkloadError::LayersNotDivisible {
            layers: model.layers,
            pp,
        });
    }
    let h = model.hidden as f64;
    let embedding = h * (model.vocab_size + model.seq_len) as f64;
    let attention = 4.0 * h * h + 2.0 * h;
    let mlp = match model.arch {
        Architecture::Dense => 8.0 * h * h + 7.0 * h,
        Architecture::Moe { layer_params, .. } => layer_params as f64,
    };
    let layers_per_stage = (model.layers / pp) as f64;
    Ok(embedding + layers_per_stage * (attention + mlp))
}

/// Activation elements crossing one stage boundary per micro-batch
/// (`2·mb·s·h`, forward activations plus backward gradients).
pub fn pp_volume(mb: u64, seq_len: u64, hidden: u64) -> f64 {
    2.0 * mb as f64 * seq_len as f64 * hidden as f64
}

/// Micro-batches per step, `gb / (mb·dp)`.
pub fn microbatch_count(gb: u64, mb: u64, dp: u64) -> Result<u64, WorkloadError> {
    let per_round = mb.checked_mul(dp).filter(|&d| d > 0);
    match per_round {
        Some(d) if gb > 0 && gb.is_multiple_of(d) => Ok(gb / d),
        _ => Err(WorkloadError::BatchNotDivisible { gb, mb, dp }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(v: u64, s: u64, h: u64, l: u64) -> ModelHyper {
        ModelHyper {
            vocab_size: v,
            seq_len: s,
            hidden: h,
            layers: l,
            arch: Architecture::Dense,
        }
    }

    #[test]
    fn dp_volume_seven_b_style() {
        // 4096·(32000+2048) + 4·(12·4096² + 9·4096)
        let v = dp_volume(&dense(32000, 2048, 4096, 32), 8).unwrap();
        assert_eq!(v, 944_914_432.0);
    }

    #[test]
    fn dp_volume_unit_hyperparameters() {
        assert_eq!(dp_volume(&dense(1, 1, 1, 1), 1).unwrap(), 23.0);
    }

    #[test]
    fn dp_volume_one_layer_per_stage() {
        let m = dense(32000, 2048, 1024, 16);
        let embedding = 1024.0 * (32000.0 + 2048.0);
        let full = dp_volume(&m, 1).unwrap() - embedding;
        let per_stage = dp_volume(&m, 16).unwrap() - embedding;
        assert_eq!(per_stage * 16.0, full);
    }

    #[test]
    fn dp_volume_rejects_uneven_layers() {
        assert!(dp_volume(&dense(1, 1, 1, 6), 4).is_err());
    }

    #[test]
    fn moe_replaces_mlp_term() {
        let mut m = dense(1, 1, 1, 2);
        m.arch = Architecture::Moe {
            experts: 4,
            layer_params: 100,
        };
        // 1·2 + 2·(4+2+100)
        assert_eq!(dp_volume(&m, 1).unwrap(), 214.0);
    }

    #[test]
    fn pp_volume_values() {
        assert_eq!(pp_volume(1, 2048, 4096), 16_777_216.0);
        assert_eq!(pp_volume(1, 1, 1), 2.0);
        assert_eq!(pp_volume(2, 2048, 4096), 2.0 * pp_volume(1, 2048, 4096));
    }

    #[test]
    fn microbatches() {
        assert_eq!(microbatch_count(96, 2, 6).unwrap(), 8);
        assert_eq!(microbatch_count(1, 1, 1).unwrap(), 1);
        assert_eq!(microbatch_count(512, 1, 64).unwrap(), 8);
        assert!(microbatch_count(10, 3, 1).is_err());
        assert!(microbatch_count(10, 0, 1).is_err());
    }
}
