//! Workload builders shared by the integration suites.

#![allow(dead_code)] // each test target uses a subset

use clonesim::core::{JobId, JobSpec};
use clonesim::stochastic::DurationDistribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bulk-arrival jobs with a small map phase and a dominant reduce phase —
/// the shape for which the per-job flowtime guarantee is sharpest, since the
/// bound charges the full reduce duration but only the backlog share of
/// everything else. `heavy` switches task durations from deterministic to
/// Pareto(2.5) with the same means.
pub fn bulk_reduce_heavy(jobs: usize, heavy: bool, seed: u64) -> Vec<JobSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..jobs)
        .map(|i| {
            let map_count = rng.random_range(1..=3u32);
            let map_mean = rng.random_range(1.0..4.0);
            let reduce_count = rng.random_range(3..=10u32);
            let reduce_mean = rng.random_range(50.0..150.0);
            let weight = rng.random_range(1..=12u32) as f64;
            let (map_dist, reduce_dist) = if heavy {
                (
                    DurationDistribution::Pareto {
                        alpha: 2.5,
                        mu: map_mean * 1.5 / 2.5,
                    },
                    DurationDistribution::Pareto {
                        alpha: 2.5,
                        mu: reduce_mean * 1.5 / 2.5,
                    },
                )
            } else {
                (
                    DurationDistribution::Deterministic { value: map_mean },
                    DurationDistribution::Deterministic { value: reduce_mean },
                )
            };
            JobSpec {
                job_id: JobId::new(format!("j{i:02}")),
                arrival_slot: 0,
                weight,
                map_count,
                reduce_count,
                map_dist,
                reduce_dist,
            }
        })
        .collect()
}

/// A bulk-arrival job with fixed integer durations, the form the exhaustive
/// optimum oracle accepts.
pub fn det_job(
    id: &str,
    weight: f64,
    map_count: u32,
    map_s: f64,
    reduce_count: u32,
    reduce_s: f64,
) -> JobSpec {
    JobSpec {
        job_id: JobId::new(id),
        arrival_slot: 0,
        weight,
        map_count,
        reduce_count,
        map_dist: DurationDistribution::Deterministic { value: map_s },
        reduce_dist: DurationDistribution::Deterministic { value: reduce_s },
    }
}
