//! Job completion time predictors. Predictions are bucket indices over
//! 10-minute intervals: bucket `b` covers durations in `((b-1)·600, b·600]`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TraceJob;

/// Width of one JCT bucket in seconds.
pub const BUCKET_SECONDS: u64 = 600;

pub trait JctPredictor: Send + Sync {
    fn predict_bucket(&self, job: &TraceJob) -> u32;
}

/// Bucket holding `duration` seconds. Zero maps to bucket 0.
pub fn bucket_of(duration: u64) -> u32 {
    duration.div_ceil(BUCKET_SECONDS) as u32
}

/// Upper edge of a bucket in seconds.
pub fn bucket_upper_bound(bucket: u32) -> u64 {
    u64::from(bucket) * BUCKET_SECONDS
}

/// Reads the true duration and shifts the bucket by a uniform offset in
/// `-noise..=noise`. The offset is a function of `(seed, job id)` alone, so
/// asking twice about the same job gives the same answer.
#[derive(Clone, Copy, Debug)]
pub struct OracleJct {
    pub noise: u32,
    pub seed: u64,
}

pub fn oracle_predictor(noise: u32, seed: u64) -> OracleJct {
    OracleJct { noise, seed }
}

impl JctPredictor for OracleJct {
    fn predict_bucket(&self, job: &TraceJob) -> u32 {
        let exact = i64::from(bucket_of(job.duration));
        if self.noise == 0 {
            return exact as u32;
        }
        let mut rng =
            ChaCha8Rng::seed_from_u64(self.seed ^ job.id.0.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let n = i64::from(self.noise);
        let shifted = exact + rng.random_range(-n..=n);
        shifted.max(1) as u32
    }
}

/// Mean bucket per feature key, learned from a finished trace.
#[derive(Clone, Debug, PartialEq)]
pub struct HistogramJct {
    features: Vec<String>,
    per_key: BTreeMap<String, u32>,
    global: u32,
}

/// Trains on `training`, keying jobs by the metadata values of `features`
/// (all metadata keys when empty). Means are rounded up.
pub fn histogram_predictor(training: &[TraceJob], features: &[String]) -> HistogramJct {
    let mut sums: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    let (mut total, mut count) = (0u64, 0u64);
    for job in training {
        let b = u64::from(bucket_of(job.duration));
        let e = sums.entry(feature_key(job, features)).or_default();
        e.0 += b;
        e.1 += 1;
        total += b;
        count += 1;
    }
    let per_key = sums
        .into_iter()
        .map(|(k, (s, n))| (k, s.div_ceil(n) as u32))
        .collect();
    HistogramJct {
        features: features.to_vec(),
        per_key,
        global: if count == 0 {
            1
        } else {
            total.div_ceil(count) as u32
        },
    }
}

impl HistogramJct {
    pub fn global_bucket(&self) -> u32 {
        self.global
    }

    pub fn known_keys(&self) -> usize {
        self.per_key.len()
    }
}

impl JctPredictor for HistogramJct {
    fn predict_bucket(&self, job: &TraceJob) -> u32 {
        self.per_key
            .get(&feature_key(job, &self.features))
            .copied()
            .unwrap_or(self.global)
    }
}

fn feature_key(job: &TraceJob, features: &[String]) -> String {
    if features.is_empty() {
        return job
            .metadata
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
    }
    features
        .iter()
        .map(|f| format!("{f}={}", job.metadata.get(f).map_or("", String::as_str)))
        .collect::<Vec<_>>()
        .join(";")
}

/// Root-mean-square bucket error over `jobs`. Zero for an empty slice.
pub fn bucket_rmse(predictor: &dyn JctPredictor, jobs: &[TraceJob]) -> f64 {
    if jobs.is_empty() {
        return 0.0;
    }
    let sq: f64 = jobs
        .iter()
        .map(|j| {
            let d = f64::from(predictor.predict_bucket(j)) - f64::from(bucket_of(j.duration));
            d * d
        })
        .sum();
    (sq / jobs.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::tests::generic;

    #[test]
    fn oracle_without_noise_is_the_ceiling() {
        let p = oracle_predictor(0, 1);
        assert_eq!(p.predict_bucket(&generic(1, 0, 900, 1)), 2);
        assert_eq!(p.predict_bucket(&generic(2, 0, 600, 1)), 1);
        assert_eq!(p.predict_bucket(&generic(3, 0, 601, 1)), 2);
        assert_eq!(bucket_upper_bound(2), 1200);
    }

    #[test]
    fn oracle_noise_is_bounded_and_stable() {
        let p = oracle_predictor(2, 9);
        let mut seen = std::collections::BTreeSet::new();
        for id in 0..300 {
            let job = generic(id, 0, 3000, 1);
            let b = p.predict_bucket(&job);
            assert_eq!(b, p.predict_bucket(&job));
            assert!((3..=7).contains(&b), "bucket {b}");
            seen.insert(b);
        }
        assert_eq!(seen.len(), 5);
    }

    #[test]
    fn histogram_means_and_fallback() {
        let mut train = Vec::new();
        for (i, (team, d)) in [("a", 600), ("a", 1800), ("b", 6000)]
            .into_iter()
            .enumerate()
        {
            let mut j = generic(i as u64, 0, d, 1);
            j.metadata.insert("team".into(), team.into());
            train.push(j);
        }
        let p = histogram_predictor(&train, &["team".to_string()]);
        let mut probe = generic(10, 0, 1, 1);
        probe.metadata.insert("team".into(), "a".into());
        assert_eq!(p.predict_bucket(&probe), 2);
        probe.metadata.insert("team".into(), "zzz".into());
        // (1 + 3 + 10) / 3 rounded up.
        assert_eq!(p.predict_bucket(&probe), 5);
        assert_eq!(p.global_bucket(), 5);
    }

    #[test]
    fn rmse_of_perfect_predictor_is_zero() {
        let jobs: Vec<_> = (0..20).map(|i| generic(i, 0, 100 + i * 250, 1)).collect();
        assert_eq!(bucket_rmse(&oracle_predictor(0, 0), &jobs), 0.0);
        assert!(bucket_rmse(&oracle_predictor(2, 0), &jobs) > 0.0);
    }
}
