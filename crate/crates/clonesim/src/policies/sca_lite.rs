//! Greedy marginal-gain cloning.
//!
//! Base pass: jobs in priority order each launch one copy per schedulable
//! task until machines run out. Clone pass: remaining machines are handed
//! out one at a time to whichever copy set launched this slot has the
//! largest marginal drop in expected completion time,
//! `E[min of k] - E[min of k+1]`, recomputed after every grant. Diminishing
//! returns (the expected-minimum sequence is discretely concave) make this
//! greedy allocation globally optimal for the slot. Gains below a floor stop
//! the pass — deterministic durations gain nothing from clones, so their
//! surplus machines stay idle.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use crate::core::{priority_order, JobId, JobPriority, Phase, RiskFactor, TaskRef};
use crate::engine::{ClusterView, LaunchDirective, Scheduler, SchedulerError};
use crate::stochastic::{
    expected_min_of, stable_hash64, substream, DurationDistribution, StreamDomain,
};

use super::{cloning::select_distinct, jobs_with_unscheduled_work, schedulable_tasks};
use super::{decision_rng, PolicyError, PolicyKind, PolicyParams};

/// Marginal gains smaller than this stop the clone pass.
const GAIN_FLOOR: f64 = 1e-12;

pub struct ScaLite {
    risk: RiskFactor,
    seed: u64,
    rng: ChaCha8Rng,
    /// Memoized E[min of k] per (job, phase tag, k); Monte Carlo for
    /// log-normal phases makes this worth caching.
    emin_cache: BTreeMap<(JobId, u64, u32), f64>,
}

impl ScaLite {
    pub fn new(params: &PolicyParams, seed: u64) -> Result<Self, PolicyError> {
        params.validate()?;
        Ok(ScaLite {
            risk: params.risk_factor()?,
            seed,
            rng: decision_rng(seed, PolicyKind::ScaLite),
            emin_cache: BTreeMap::new(),
        })
    }

    fn expected_min(
        &mut self,
        job: &JobId,
        phase: Phase,
        dist: &DurationDistribution,
        k: u32,
    ) -> Result<f64, SchedulerError> {
        let key = (job.clone(), phase.tag(), k);
        if let Some(&v) = self.emin_cache.get(&key) {
            return Ok(v);
        }
        // Fresh estimator stream per (job, phase, k): the cached value is
        // identical no matter when it is first needed.
        let mut est = substream(
            self.seed,
            StreamDomain::Estimator,
            [stable_hash64(job.as_str()), phase.tag() << 32, u64::from(k)],
        );
        let v = expected_min_of(dist, k, &mut est)
            .map_err(|e| SchedulerError::Contract(e.to_string()))?
            .value_s;
        self.emin_cache.insert(key, v);
        Ok(v)
    }
}

struct Plan {
    task: TaskRef,
    copies: u32,
    dist: DurationDistribution,
}

impl Scheduler for ScaLite {
    fn name(&self) -> &'static str {
        PolicyKind::ScaLite.name()
    }

    fn decide(&mut self, view: &ClusterView<'_>) -> Result<Vec<LaunchDirective>, SchedulerError> {
        let mut free = view.free_machines();
        let alive = jobs_with_unscheduled_work(view, self.risk)?;
        if alive.is_empty() || free == 0 {
            return Ok(Vec::new());
        }
        let mut ranked: Vec<JobPriority> = alive
            .into_iter()
            .map(|(job_id, weight, workload_s)| JobPriority {
                job_id,
                weight,
                workload_s,
            })
            .collect();
        ranked.sort_by(priority_order);

        // Base pass: one copy per schedulable task, priority order.
        let mut plans: Vec<Plan> = Vec::new();
        for jp in &ranked {
            if free == 0 {
                break;
            }
            let snap = view.job(&jp.job_id).expect("ranked job is alive");
            let (phase, tasks) = schedulable_tasks(&snap);
            if tasks.is_empty() {
                continue;
            }
            let take = tasks.len().min(free);
            let dist = match phase {
                Phase::Map => snap.spec.map_dist.clone(),
                Phase::Reduce => snap.spec.reduce_dist.clone(),
            };
            for index in select_distinct(&tasks, take, &mut self.rng) {
                plans.push(Plan {
                    task: TaskRef {
                        job: jp.job_id.clone(),
                        phase,
                        index,
                    },
                    copies: 1,
                    dist: dist.clone(),
                });
            }
            free -= take;
        }

        // Clone pass: spend leftovers on the best marginal gain, one machine
        // at a time. Ties go to the earliest plan (higher priority job,
        // lower task index).
        while free > 0 && !plans.is_empty() {
            let mut best: Option<(usize, f64)> = None;
            for (i, plan) in plans.iter().enumerate() {
                let k = plan.copies;
                let gain = self.expected_min(&plan.task.job, plan.task.phase, &plan.dist, k)?
                    - self.expected_min(&plan.task.job, plan.task.phase, &plan.dist, k + 1)?;
                if best.is_none_or(|(_, g)| gain > g) {
                    best = Some((i, gain));
                }
            }
            let (i, gain) = best.expect("plans is non-empty");
            if gain <= GAIN_FLOOR {
                break;
            }
            plans[i].copies += 1;
            free -= 1;
        }

        Ok(plans
            .into_iter()
            .map(|p| LaunchDirective {
                task: p.task,
                copies: p.copies,
            })
            .collect())
    }
}
