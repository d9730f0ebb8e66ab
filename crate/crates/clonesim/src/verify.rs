//! Independent verification oracles.
//!
//! Three checks live here, deliberately decoupled from the schedulers they
//! judge:
//!
//! * an exact brute-force optimum for tiny deterministic instances, used to
//!   measure how far the offline bulk scheduler sits from optimal;
//! * a worst-case harness that replays an instance under many decision seeds
//!   and keeps the worst total weighted flowtime;
//! * a statistical checker for the per-job flowtime guarantee: run many
//!   replications, count how often each job beats its bound, and compare the
//!   Wilson upper confidence limit against the claimed probability floor.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::core::{
    higher_priority_backlog, flowtime_bound, CoreError, JobId, JobSpec, RiskFactor,
};
use crate::engine::{run, EngineError, SimulationConfig, SimulationResult};
use crate::metrics::{fmt_sig, Exportable};
use crate::policies::{build, PolicyError, PolicyKind, PolicyParams};
use crate::stochastic::{DurationDistribution, PhaseMoments};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("instance outside oracle limits: {0}")]
    OutsideOracleLimits(String),
    #[error("verification setup invalid: {0}")]
    Invalid(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

const MAX_ORACLE_JOBS: usize = 3;
const MAX_ORACLE_TASKS: u32 = 6;
const MAX_ORACLE_MACHINES: u32 = 3;
const MAX_ORACLE_DURATION: u32 = 600;

#[derive(Debug, Clone)]
struct OracleJob {
    weight: u64,
    map_count: u32,
    map_duration: u32,
    reduce_count: u32,
    reduce_duration: u32,
}

/// A deterministic bulk instance small enough to solve exactly: at most
/// 3 jobs, 6 tasks, and 3 machines, with integer weights and durations.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    jobs: Vec<OracleJob>,
    machines: u32,
}

fn integer_duration(dist: &DurationDistribution, what: &str) -> Result<u32, VerifyError> {
    match dist {
        DurationDistribution::Deterministic { value }
            if value.fract() == 0.0 && *value >= 1.0 && *value <= MAX_ORACLE_DURATION as f64 =>
        {
            Ok(*value as u32)
        }
        other => Err(VerifyError::OutsideOracleLimits(format!(
            "{what} must be deterministic with an integer duration in 1..={MAX_ORACLE_DURATION} (got {other:?})"
        ))),
    }
}

impl OracleInstance {
    pub fn from_jobs(jobs: &[JobSpec], machines: u32) -> Result<Self, VerifyError> {
        if jobs.is_empty() || jobs.len() > MAX_ORACLE_JOBS {
            return Err(VerifyError::OutsideOracleLimits(format!(
                "need 1..={MAX_ORACLE_JOBS} jobs (got {})",
                jobs.len()
            )));
        }
        if !(1..=MAX_ORACLE_MACHINES).contains(&machines) {
            return Err(VerifyError::OutsideOracleLimits(format!(
                "need 1..={MAX_ORACLE_MACHINES} machines (got {machines})"
            )));
        }
        let mut out = Vec::with_capacity(jobs.len());
        let mut total_tasks = 0u32;
        for spec in jobs {
            spec.validate()?;
            if spec.arrival_slot != 0 {
                return Err(VerifyError::OutsideOracleLimits(format!(
                    "job {} arrives at slot {}, but the oracle only handles bulk arrivals",
                    spec.job_id, spec.arrival_slot
                )));
            }
            if spec.weight.fract() != 0.0 || spec.weight < 1.0 {
                return Err(VerifyError::OutsideOracleLimits(format!(
                    "job {} weight {} is not a positive integer",
                    spec.job_id, spec.weight
                )));
            }
            total_tasks += spec.map_count + spec.reduce_count;
            let map_duration = integer_duration(&spec.map_dist, "map duration")?;
            let reduce_duration = if spec.reduce_count > 0 {
                integer_duration(&spec.reduce_dist, "reduce duration")?
            } else {
                1
            };
            out.push(OracleJob {
                weight: spec.weight as u64,
                map_count: spec.map_count,
                map_duration,
                reduce_count: spec.reduce_count,
                reduce_duration,
            });
        }
        if total_tasks > MAX_ORACLE_TASKS {
            return Err(VerifyError::OutsideOracleLimits(format!(
                "instance has {total_tasks} tasks; the oracle handles at most {MAX_ORACLE_TASKS}"
            )));
        }
        Ok(OracleInstance {
            jobs: out,
            machines,
        })
    }

    /// Exact minimum total weighted flowtime over all non-preemptive
    /// schedules, idling allowed.
    ///
    /// The search walks slot by slot; at each slot it branches over how many
    /// fresh maps and reduces each job starts (tasks within a phase are
    /// interchangeable, so counts suffice). Reduces become startable only
    /// once a job's maps are all finished — holding a machine with a stalled
    /// reduce can only delay other work, so no optimal schedule does it.
    /// Pure idling (nothing running, nothing started) is excluded for the
    /// same reason. With bulk arrivals the future cost from a state does not
    /// depend on the current slot, so states memoize cleanly: each alive job
    /// pays its weight per elapsed slot until it finishes.
    pub fn brute_force_optimal(&self) -> u64 {
        let initial: Vec<JobState> = self
            .jobs
            .iter()
            .map(|j| JobState {
                running_maps: Vec::new(),
                unstarted_maps: j.map_count,
                running_reduces: Vec::new(),
                unstarted_reduces: j.reduce_count,
            })
            .collect();
        let mut memo = HashMap::new();
        self.future_cost(&initial, &mut memo)
    }

    fn future_cost(&self, state: &[JobState], memo: &mut HashMap<Vec<JobState>, u64>) -> u64 {
        let alive_weight: u64 = self
            .jobs
            .iter()
            .zip(state)
            .filter(|(_, s)| s.alive())
            .map(|(j, _)| j.weight)
            .sum();
        if alive_weight == 0 {
            return 0;
        }
        if let Some(&g) = memo.get(state) {
            return g;
        }
        let running: u32 = state
            .iter()
            .map(|s| (s.running_maps.len() + s.running_reduces.len()) as u32)
            .sum();
        let free = self.machines - running;
        let mut choices = Vec::new();
        fill_choices(state, 0, free, &mut Vec::with_capacity(state.len()), &mut choices);
        let mut best = u64::MAX;
        for choice in &choices {
            if running == 0 && choice.iter().all(|&(a, b)| a == 0 && b == 0) {
                continue;
            }
            let next = self.advance(state, choice);
            let cost = alive_weight + self.future_cost(&next, memo);
            best = best.min(cost);
        }
        memo.insert(state.to_vec(), best);
        best
    }

    /// Start the chosen copies, then run every machine for one slot.
    fn advance(&self, state: &[JobState], choice: &[(u32, u32)]) -> Vec<JobState> {
        state
            .iter()
            .zip(self.jobs.iter())
            .zip(choice)
            .map(|((s, job), &(new_maps, new_reduces))| {
                let mut maps = s.running_maps.clone();
                maps.extend(std::iter::repeat_n(job.map_duration, new_maps as usize));
                let mut reduces = s.running_reduces.clone();
                reduces.extend(std::iter::repeat_n(job.reduce_duration, new_reduces as usize));
                let tick = |v: Vec<u32>| -> Vec<u32> {
                    let mut out: Vec<u32> = v.into_iter().map(|r| r - 1).filter(|&r| r > 0).collect();
                    out.sort_unstable();
                    out
                };
                JobState {
                    running_maps: tick(maps),
                    unstarted_maps: s.unstarted_maps - new_maps,
                    running_reduces: tick(reduces),
                    unstarted_reduces: s.unstarted_reduces - new_reduces,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct JobState {
    /// Remaining slots of each running map, ascending.
    running_maps: Vec<u32>,
    unstarted_maps: u32,
    running_reduces: Vec<u32>,
    unstarted_reduces: u32,
}

impl JobState {
    fn alive(&self) -> bool {
        !self.running_maps.is_empty()
            || self.unstarted_maps > 0
            || !self.running_reduces.is_empty()
            || self.unstarted_reduces > 0
    }

    fn maps_done(&self) -> bool {
        self.running_maps.is_empty() && self.unstarted_maps == 0
    }
}

/// Enumerate per-job (new maps, new reduces) launch counts within `budget`.
fn fill_choices(
    state: &[JobState],
    idx: usize,
    budget: u32,
    cur: &mut Vec<(u32, u32)>,
    out: &mut Vec<Vec<(u32, u32)>>,
) {
    if idx == state.len() {
        out.push(cur.clone());
        return;
    }
    let s = &state[idx];
    let max_reduces = if s.maps_done() { s.unstarted_reduces } else { 0 };
    for a in 0..=s.unstarted_maps.min(budget) {
        for b in 0..=max_reduces.min(budget - a) {
            cur.push((a, b));
            fill_choices(state, idx + 1, budget - a - b, cur, out);
            cur.pop();
        }
    }
}

/// Total weighted flowtime of a completed run, in exact integer arithmetic
/// (weights must be integers).
pub fn total_weighted_flowtime(result: &SimulationResult) -> Result<u64, VerifyError> {
    if !result.complete() {
        return Err(VerifyError::Invalid(format!(
            "run left {} jobs unfinished; flowtime total undefined",
            result.unfinished.len()
        )));
    }
    let mut total = 0u64;
    for o in &result.outcomes {
        if o.weight.fract() != 0.0 || o.weight < 1.0 {
            return Err(VerifyError::Invalid(format!(
                "job {} weight {} is not a positive integer",
                o.job_id, o.weight
            )));
        }
        total += o.weight as u64 * o.flowtime_s;
    }
    Ok(total)
}

/// Worst total weighted flowtime of the offline bulk scheduler over `seeds`
/// decision seeds (it randomizes which task within a phase launches first).
pub fn worst_offline_flowtime(
    jobs: &[JobSpec],
    machines: u32,
    seeds: u64,
    master_seed: u64,
) -> Result<u64, VerifyError> {
    if seeds == 0 {
        return Err(VerifyError::Invalid("need at least one seed".into()));
    }
    let params = PolicyParams::default();
    let mut worst = 0u64;
    for s in 0..seeds {
        let seed = master_seed.wrapping_add(s);
        let mut sched = build(PolicyKind::OfflineBulkSrpt, &params, seed)?;
        let config = SimulationConfig::new(machines as usize, seed);
        let result = run(jobs, sched.as_mut(), &config)?;
        worst = worst.max(total_weighted_flowtime(&result)?);
    }
    Ok(worst)
}

/// Slack added to each flowtime bound before counting a success: the
/// guarantee is stated in continuous time, while the simulator rounds both
/// task starts and job completions up to slot boundaries, each worth at most
/// one slot.
pub const BOUND_SLACK_S: f64 = 2.0;

/// Wilson score upper confidence limit for a binomial proportion.
pub fn wilson_upper(successes: u32, trials: u32, z: f64) -> f64 {
    assert!(trials > 0, "wilson interval needs at least one trial");
    assert!(successes <= trials);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    (center + half).min(1.0)
}

/// One job's verdict: how often its flowtime beat the bound, and whether the
/// 95% Wilson upper limit clears the claimed probability floor.
#[derive(Debug, Clone, Serialize)]
pub struct JobBoundCheck {
    pub job_id: String,
    pub bound_s: f64,
    pub claimed_min_probability: f64,
    /// Risk factor <= 1 makes the floor vacuous; recorded, never failed.
    pub trivial: bool,
    pub successes: u32,
    pub replications: u32,
    pub empirical_rate: f64,
    pub wilson_upper_95: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub machines: usize,
    pub risk: f64,
    pub replications: u32,
    pub slack_s: f64,
    pub overall_pass: bool,
    pub jobs: Vec<JobBoundCheck>,
}

impl Exportable for BoundReport {
    fn csv_text(&self) -> String {
        let mut out =
            String::from("job_id,bound_s,claimed_min_probability,empirical_rate,wilson_upper_95,pass\n");
        for j in &self.jobs {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                j.job_id,
                fmt_sig(j.bound_s),
                fmt_sig(j.claimed_min_probability),
                fmt_sig(j.empirical_rate),
                fmt_sig(j.wilson_upper_95),
                j.pass,
            ));
        }
        out
    }

    fn json_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("bound report serializes")
    }
}

/// Check every job's flowtime guarantee under the offline bulk scheduler.
///
/// Each replication reruns the whole workload with a fresh seed (fresh task
/// durations and decision draws). A replication counts as a success for job
/// `i` when its flowtime is at most the job's bound plus [`BOUND_SLACK_S`].
/// The check passes when the Wilson 95% upper limit of the success rate
/// reaches the claimed floor — i.e. we only fail when the data are
/// statistically incompatible with the guarantee.
///
/// Requires a bulk-arrival workload, a risk factor above 1 (at or below 1
/// the claimed floor is zero and the check is vacuous), and at least 100
/// replications so the rate estimate is stable.
pub fn check_flowtime_bounds(
    jobs: &[JobSpec],
    machines: usize,
    risk: RiskFactor,
    replications: u32,
    master_seed: u64,
) -> Result<BoundReport, VerifyError> {
    if jobs.is_empty() {
        return Err(VerifyError::Invalid("no jobs to check".into()));
    }
    if risk.value() <= 1.0 {
        return Err(VerifyError::Invalid(format!(
            "risk factor {} yields a vacuous guarantee; need r > 1",
            risk.value()
        )));
    }
    if replications < 100 {
        return Err(VerifyError::Invalid(format!(
            "{replications} replications is too few for a stable rate estimate; need at least 100"
        )));
    }
    if let Some(j) = jobs.iter().find(|j| j.arrival_slot != 0) {
        return Err(VerifyError::Invalid(format!(
            "job {} arrives at slot {}; the guarantee covers bulk arrivals only",
            j.job_id, j.arrival_slot
        )));
    }

    let pairs: Vec<(f64, f64)> = jobs
        .iter()
        .map(|j| Ok((j.weight, j.full_effective_workload(risk)?)))
        .collect::<Result<_, CoreError>>()?;
    let bounds: Vec<_> = jobs
        .iter()
        .enumerate()
        .map(|(i, j)| {
            let backlog = higher_priority_backlog(&pairs, i)?;
            let reduce = if j.reduce_count > 0 {
                j.reduce_moments()
            } else {
                PhaseMoments::new(0.0, 0.0)
            };
            flowtime_bound(reduce, backlog, machines, risk)
        })
        .collect::<Result<_, CoreError>>()?;

    let params = PolicyParams {
        risk: risk.value(),
        ..PolicyParams::default()
    };
    let flows: Vec<BTreeMap<JobId, u64>> = (0..replications)
        .into_par_iter()
        .map(|k| -> Result<BTreeMap<JobId, u64>, VerifyError> {
            let seed = master_seed.wrapping_add(k as u64);
            let mut sched = build(PolicyKind::OfflineBulkSrpt, &params, seed)?;
            let config = SimulationConfig::new(machines, seed);
            let result = run(jobs, sched.as_mut(), &config)?;
            if !result.complete() {
                return Err(VerifyError::Invalid(format!(
                    "replication {k} truncated with {} jobs unfinished",
                    result.unfinished.len()
                )));
            }
            Ok(result
                .outcomes
                .into_iter()
                .map(|o| (o.job_id, o.flowtime_s))
                .collect())
        })
        .collect::<Result<_, _>>()?;

    let checks: Vec<JobBoundCheck> = jobs
        .iter()
        .zip(&bounds)
        .map(|(job, bound)| {
            let successes = flows
                .iter()
                .filter(|m| {
                    let f = m[&job.job_id] as f64;
                    f <= bound.bound_s + BOUND_SLACK_S
                })
                .count() as u32;
            let upper = wilson_upper(successes, replications, 1.96);
            JobBoundCheck {
                job_id: job.job_id.as_str().to_string(),
                bound_s: bound.bound_s,
                claimed_min_probability: bound.min_probability,
                trivial: bound.trivial_probability,
                successes,
                replications,
                empirical_rate: successes as f64 / replications as f64,
                wilson_upper_95: upper,
                pass: upper >= bound.min_probability,
            }
        })
        .collect();

    Ok(BoundReport {
        machines,
        risk: risk.value(),
        replications,
        slack_s: BOUND_SLACK_S,
        overall_pass: checks.iter().all(|c| c.pass),
        jobs: checks,
    })
}
