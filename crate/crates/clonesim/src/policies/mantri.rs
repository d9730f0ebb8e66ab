//! Fair sharing with reactive straggler backups.
//!
//! Fresh tasks are launched exactly like the fair baseline (weight
//! proportional shares, one copy per task). Machines left over afterwards go
//! to *backups*: for each running copy with observed elapsed work `e`, the
//! scheduler estimates the probability that its remaining duration exceeds
//! `multiplier` times a fresh copy's duration, conditioning the task's
//! duration distribution on `T > e`. When that probability exceeds `delta`
//! the copy gets one backup; a task is never backed up twice. Heavy-tailed
//! durations make this fire for copies that have already run long — exactly
//! the "outlier" reaction this baseline is known for — while deterministic
//! durations never trigger it.

use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::ChaCha8Rng;

use crate::core::{JobId, Phase, RiskFactor, TaskRef};
use crate::engine::{ClusterView, LaunchDirective, Scheduler, SchedulerError};
use crate::stochastic::{stable_hash64, substream, DurationDistribution, StreamDomain};

use super::{decision_rng, share_driven_pass, PolicyError, PolicyKind, PolicyParams};

/// P(T - elapsed > multiplier * S | T > elapsed) where `T` and the fresh
/// duration `S` are independent draws from `dist`.
///
/// * Deterministic: a 0/1 indicator — never 1 for multiplier >= 1.
/// * Pareto(alpha, mu): the conditional tail is itself Pareto with scale
///   `max(mu, elapsed)`, so the probability is the exact integral
///   `E_S[(max(mu, elapsed) / (elapsed + multiplier * S))^alpha]`, evaluated
///   by Simpson quadrature after substituting `S = mu / u`, `u` in (0, 1].
/// * LogNormal: no closed form; a 10^4-draw Monte Carlo average of
///   `survival(elapsed + multiplier * S) / survival(elapsed)` over fresh `S`
///   (the conditioning handled exactly through the survival ratio).
pub fn remaining_exceeds_probability(
    dist: &DurationDistribution,
    elapsed_s: f64,
    multiplier: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    debug_assert!(elapsed_s > 0.0 && multiplier >= 0.0);
    match *dist {
        DurationDistribution::Deterministic { value } => {
            if value - elapsed_s > multiplier * value {
                1.0
            } else {
                0.0
            }
        }
        DurationDistribution::Pareto { alpha, mu } => {
            let m0 = mu.max(elapsed_s);
            let h = |u: f64| -> f64 {
                if u <= 0.0 {
                    return 0.0;
                }
                let tail = (m0 * u / (elapsed_s * u + multiplier * mu)).powf(alpha);
                alpha * u.powf(alpha - 1.0) * tail
            };
            let n = 512usize; // even panel count for composite Simpson
            let dx = 1.0 / n as f64;
            let mut acc = h(0.0) + h(1.0);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * h(i as f64 * dx);
            }
            (acc * dx / 3.0).clamp(0.0, 1.0)
        }
        DurationDistribution::LogNormal { .. } => {
            let denom = dist.survival(elapsed_s);
            if denom <= 0.0 {
                return 0.0;
            }
            const DRAWS: u32 = 10_000;
            let mut acc = 0.0;
            for _ in 0..DRAWS {
                let fresh = dist.sample(rng);
                acc += dist.survival(elapsed_s + multiplier * fresh);
            }
            (acc / f64::from(DRAWS) / denom).clamp(0.0, 1.0)
        }
    }
}

pub struct Mantri {
    risk: RiskFactor,
    delta: f64,
    multiplier: f64,
    seed: u64,
    rng: ChaCha8Rng,
    /// Tasks already granted their one backup.
    backed_up: BTreeSet<TaskRef>,
    /// Probability estimates keyed by (job, phase tag, elapsed slots).
    /// Copies of the same job phase with equal elapsed work face the same
    /// conditional distribution, so one estimate serves them all — this
    /// keeps the per-slot cost flat even on large clusters.
    estimates: BTreeMap<(JobId, u64, u64), f64>,
}

impl Mantri {
    pub fn new(params: &PolicyParams, seed: u64) -> Result<Self, PolicyError> {
        params.validate()?;
        Ok(Mantri {
            risk: params.risk_factor()?,
            delta: params.mantri_delta,
            multiplier: params.mantri_multiplier,
            seed,
            rng: decision_rng(seed, PolicyKind::Mantri),
            backed_up: BTreeSet::new(),
            estimates: BTreeMap::new(),
        })
    }
}

impl Scheduler for Mantri {
    fn name(&self) -> &'static str {
        PolicyKind::Mantri.name()
    }

    fn decide(&mut self, view: &ClusterView<'_>) -> Result<Vec<LaunchDirective>, SchedulerError> {
        let (mut directives, mut free) =
            share_driven_pass(view, 1.0, self.risk, false, &mut self.rng)?;
        if free == 0 {
            return Ok(directives);
        }
        for cp in view.running_progress() {
            if free == 0 {
                break;
            }
            if cp.blocked || cp.elapsed_work_s <= 0.0 || self.backed_up.contains(&cp.task) {
                continue;
            }
            let Some(snap) = view.job(&cp.task.job) else {
                continue;
            };
            let dist = match cp.task.phase {
                Phase::Map => &snap.spec.map_dist,
                Phase::Reduce => &snap.spec.reduce_dist,
            };
            let elapsed_slots = (cp.elapsed_work_s / view.speed()).round() as u64;
            let key = (cp.task.job.clone(), cp.task.phase.tag(), elapsed_slots);
            let p = match self.estimates.get(&key) {
                Some(&p) => p,
                None => {
                    // Fresh estimator stream per (task, slot): deterministic
                    // no matter how many candidates preceded this one.
                    let mut est = substream(
                        self.seed,
                        StreamDomain::Estimator,
                        [
                            stable_hash64(cp.task.job.as_str()),
                            (cp.task.phase.tag() << 32) | u64::from(cp.task.index),
                            view.slot(),
                        ],
                    );
                    let p = remaining_exceeds_probability(
                        dist,
                        cp.elapsed_work_s,
                        self.multiplier,
                        &mut est,
                    );
                    self.estimates.insert(key, p);
                    p
                }
            };
            if p > self.delta {
                directives.push(LaunchDirective {
                    task: cp.task.clone(),
                    copies: 1,
                });
                self.backed_up.insert(cp.task.clone());
                free -= 1;
            }
        }
        Ok(directives)
    }
}
