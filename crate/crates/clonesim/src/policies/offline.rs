//! Strict-priority scheduler for bulk arrivals.
//!
//! All jobs must arrive at slot 0. The priority order — weight over full
//! effective workload, descending — is computed once up front and never
//! revisited; every slot the highest-priority job with unscheduled tasks
//! soaks up all free machines, one copy per task, picking tasks uniformly at
//! random (maps before reduces). Reduces launch as soon as their job's maps
//! are all *scheduled*, so they may sit blocked on a machine while maps run;
//! that keeps the scheduler work-conserving at the price of occupied-idle
//! machines.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::core::{priority_order, JobId, JobPriority, Phase, RiskFactor, TaskRef};
use crate::engine::{ClusterView, LaunchDirective, Scheduler, SchedulerError};

use super::{decision_rng, PolicyError, PolicyKind, PolicyParams};

pub struct OfflineBulkSrpt {
    risk: RiskFactor,
    rng: ChaCha8Rng,
    /// Job ids in descending priority, frozen at the first decision.
    order: Option<Vec<JobId>>,
}

impl OfflineBulkSrpt {
    pub fn new(params: &PolicyParams, seed: u64) -> Result<Self, PolicyError> {
        params.validate()?;
        Ok(OfflineBulkSrpt {
            risk: params.risk_factor()?,
            rng: decision_rng(seed, PolicyKind::OfflineBulkSrpt),
            order: None,
        })
    }
}

impl Scheduler for OfflineBulkSrpt {
    fn name(&self) -> &'static str {
        PolicyKind::OfflineBulkSrpt.name()
    }

    fn decide(&mut self, view: &ClusterView<'_>) -> Result<Vec<LaunchDirective>, SchedulerError> {
        for id in view.job_ids() {
            let snap = view.job(id).expect("listed job is alive");
            if snap.spec.arrival_slot != 0 {
                return Err(SchedulerError::Contract(format!(
                    "bulk scheduler saw job {id} arriving at slot {}; all jobs must arrive at 0",
                    snap.spec.arrival_slot
                )));
            }
        }
        if self.order.is_none() {
            let mut ranked = Vec::new();
            for id in view.job_ids() {
                let snap = view.job(id).expect("listed job is alive");
                let workload = snap
                    .spec
                    .full_effective_workload(self.risk)
                    .map_err(|e| SchedulerError::Contract(e.to_string()))?;
                ranked.push(JobPriority {
                    job_id: id.clone(),
                    weight: snap.spec.weight,
                    workload_s: workload,
                });
            }
            ranked.sort_by(priority_order);
            self.order = Some(ranked.into_iter().map(|jp| jp.job_id).collect());
        }

        let mut free = view.free_machines();
        let mut out = Vec::new();
        for id in self.order.as_ref().unwrap().clone() {
            if free == 0 {
                break;
            }
            let Some(snap) = view.job(&id) else {
                continue; // already finished
            };
            for (phase, mut indices) in [
                (Phase::Map, snap.unscheduled_map),
                (Phase::Reduce, snap.unscheduled_reduce),
            ] {
                while free > 0 && !indices.is_empty() {
                    let pick = self.rng.random_range(0..indices.len());
                    let index = indices.swap_remove(pick);
                    out.push(LaunchDirective {
                        task: TaskRef {
                            job: id.clone(),
                            phase,
                            index,
                        },
                        copies: 1,
                    });
                    free -= 1;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::JobSpec;
    use crate::engine::{run, EngineError, SimulationConfig};
    use crate::stochastic::DurationDistribution as Dist;

    fn det_job(id: &str, weight: f64, maps: u32, map_s: f64, reduces: u32, reduce_s: f64) -> JobSpec {
        JobSpec {
            job_id: JobId::new(id),
            arrival_slot: 0,
            weight,
            map_count: maps,
            reduce_count: reduces,
            map_dist: Dist::Deterministic { value: map_s },
            reduce_dist: Dist::Deterministic { value: reduce_s },
        }
    }

    fn sched(seed: u64) -> OfflineBulkSrpt {
        OfflineBulkSrpt::new(&PolicyParams::default(), seed).unwrap()
    }

    /// Shorter job first on one machine: the 4-second job finishes all its
    /// tasks before the 10-second job runs at all.
    #[test]
    fn strict_priority_finishes_short_job_first() {
        let jobs = [
            det_job("long", 1.0, 1, 10.0, 0, 1.0),
            det_job("short", 1.0, 2, 2.0, 0, 1.0),
        ];
        let res = run(&jobs, &mut sched(3), &SimulationConfig::new(1, 3)).unwrap();
        assert_eq!(res.outcome(&JobId::new("short")).unwrap().flowtime_s, 4);
        assert_eq!(res.outcome(&JobId::new("long")).unwrap().flowtime_s, 14);
    }

    /// Equal workloads: the heavier weight wins the tie on priority.
    #[test]
    fn weight_breaks_workload_ties() {
        let jobs = [
            det_job("light", 1.0, 1, 6.0, 0, 1.0),
            det_job("heavy", 2.0, 1, 6.0, 0, 1.0),
        ];
        let res = run(&jobs, &mut sched(3), &SimulationConfig::new(1, 3)).unwrap();
        assert_eq!(res.outcome(&JobId::new("heavy")).unwrap().flowtime_s, 6);
        assert_eq!(res.outcome(&JobId::new("light")).unwrap().flowtime_s, 12);
    }

    #[test]
    fn rejects_online_arrivals() {
        let mut late = det_job("late", 1.0, 1, 2.0, 0, 1.0);
        late.arrival_slot = 5;
        let res = run(&[late], &mut sched(0), &SimulationConfig::new(1, 0));
        assert!(matches!(res, Err(EngineError::Scheduler(_))));
    }

    /// Reduces launch alongside maps and wait blocked on their machines, so
    /// the whole job occupies the cluster from slot 0.
    #[test]
    fn reduces_launch_blocked_behind_maps() {
        let jobs = [det_job("j", 1.0, 2, 5.0, 2, 5.0)];
        let mut cfg = SimulationConfig::new(4, 1);
        cfg.audit = true;
        let res = run(&jobs, &mut sched(1), &cfg).unwrap();
        assert_eq!(res.utilization[0].map_running, 2);
        assert_eq!(res.utilization[0].reduce_running, 2);
        // Maps occupy slots 1-5, reduces make progress only in slots 6-10.
        assert_eq!(res.outcomes[0].flowtime_s, 10);
        assert!(res.audit.unwrap().clean());
    }
}
