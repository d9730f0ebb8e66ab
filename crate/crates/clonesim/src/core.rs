//! Domain types for jobs, tasks, and cluster state, plus the
//! shortest-remaining-workload arithmetic shared by schedulers and verifiers:
//! effective workload, job priority, higher-priority backlog, and the
//! per-job probabilistic flowtime bound.
//!
//! One simulation slot is one second of wall-clock time; workloads and bounds
//! are expressed in seconds so slot counts and seconds compare directly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::stochastic::{DurationDistribution, PhaseMoments};

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("job {0} has zero effective workload (all tasks accounted); priority undefined")]
    ZeroEffectiveWorkload(JobId),
    #[error("target index {index} out of range for {len} jobs")]
    TargetOutOfRange { index: usize, len: usize },
}

/// Opaque job identifier. Ordering (lexicographic) is the deterministic
/// tie-break everywhere two jobs compare equal on priority.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JobId(Arc<str>);

impl JobId {
    pub fn new(id: impl AsRef<str>) -> Self {
        JobId(Arc::from(id.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for JobId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for JobId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(JobId::new(String::deserialize(d)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Phase {
    Map,
    Reduce,
}

impl Phase {
    /// Stable numeric tag for RNG stream keys.
    pub fn tag(self) -> u64 {
        match self {
            Phase::Map => 0,
            Phase::Reduce => 1,
        }
    }
}

/// One task within a job's map or reduce phase.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskRef {
    pub job: JobId,
    pub phase: Phase,
    pub index: u32,
}

impl fmt::Display for TaskRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let phase = match self.phase {
            Phase::Map => "map",
            Phase::Reduce => "reduce",
        };
        write!(f, "{}/{}[{}]", self.job, phase, self.index)
    }
}

/// Risk multiplier `r` applied to standard deviations when hedging against
/// stragglers: an effective task costs `mean + r * sd` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskFactor(f64);

impl RiskFactor {
    pub fn new(r: f64) -> Result<Self, CoreError> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(CoreError::ContractViolation(format!(
                "risk factor must be finite and >= 0 (got {r})"
            )));
        }
        Ok(RiskFactor(r))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Static description of a job: bulk identity, weight, task counts, and the
/// per-phase duration distributions shared by all tasks of that phase.
#[derive(Debug, Clone)]
pub struct JobSpec {
    pub job_id: JobId,
    pub arrival_slot: u64,
    /// Positive scheduling weight (trace priority class + 1).
    pub weight: f64,
    pub map_count: u32,
    pub reduce_count: u32,
    pub map_dist: DurationDistribution,
    pub reduce_dist: DurationDistribution,
}

impl JobSpec {
    /// A job is usable when it has at least one map task, a positive finite
    /// weight, and finite-variance duration distributions for both phases.
    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(CoreError::ContractViolation(format!(
                "job {}: weight must be positive and finite (got {})",
                self.job_id, self.weight
            )));
        }
        if self.map_count < 1 {
            return Err(CoreError::ContractViolation(format!(
                "job {}: needs at least one map task",
                self.job_id
            )));
        }
        for (phase, dist) in [("map", &self.map_dist), ("reduce", &self.reduce_dist)] {
            dist.validate().map_err(|e| {
                CoreError::ContractViolation(format!("job {} {phase} phase: {e}", self.job_id))
            })?;
            let m = dist.moments();
            if !(m.mean_s.is_finite() && m.sd_s.is_finite()) {
                return Err(CoreError::ContractViolation(format!(
                    "job {} {phase} phase: moments must be finite (mean={}, sd={})",
                    self.job_id, m.mean_s, m.sd_s
                )));
            }
        }
        Ok(())
    }

    pub fn map_moments(&self) -> PhaseMoments {
        self.map_dist.moments()
    }

    pub fn reduce_moments(&self) -> PhaseMoments {
        self.reduce_dist.moments()
    }

    /// Effective workload of the whole job (all tasks pending).
    pub fn full_effective_workload(&self, risk: RiskFactor) -> Result<f64, CoreError> {
        effective_workload(
            self.map_moments(),
            self.map_count,
            self.reduce_moments(),
            self.reduce_count,
            risk,
        )
    }

    /// Effective workload of the still-unscheduled portion of the job.
    pub fn live_effective_workload(
        &self,
        pending_map: u32,
        pending_reduce: u32,
        risk: RiskFactor,
    ) -> Result<f64, CoreError> {
        effective_workload(
            self.map_moments(),
            pending_map,
            self.reduce_moments(),
            pending_reduce,
            risk,
        )
    }
}

/// One launched copy of a task, bound to a machine until it finishes or its
/// task completes through a sibling copy.
#[derive(Debug, Clone)]
pub struct CopyInstance {
    pub task: TaskRef,
    pub machine: u32,
    pub sampled_workload_s: f64,
    pub remaining_s: f64,
    pub started_slot: u64,
    /// Reduce copies are blocked (occupy a machine, make no progress) until
    /// every map task of the job has finished.
    pub blocked: bool,
}

/// Arrival/completion record for a finished job.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FlowtimeRecord {
    pub arrival_slot: u64,
    pub completion_slot: u64,
    pub weight: f64,
}

impl FlowtimeRecord {
    pub fn flowtime_slots(&self) -> u64 {
        self.completion_slot - self.arrival_slot
    }
}

/// Mutable cluster snapshot the engine maintains slot by slot.
///
/// `pending_map` / `pending_reduce` count *unscheduled* tasks (no copy
/// launched yet); a job stays in `alive_jobs` until all of its tasks have
/// finished.
#[derive(Debug, Clone)]
pub struct ClusterState {
    pub slot: u64,
    pub machine_count: usize,
    pub speed: f64,
    pub running: Vec<CopyInstance>,
    pub alive_jobs: BTreeSet<JobId>,
    pub pending_map: BTreeMap<JobId, u32>,
    pub pending_reduce: BTreeMap<JobId, u32>,
    pub completed: BTreeMap<JobId, FlowtimeRecord>,
}

impl ClusterState {
    pub fn new(machine_count: usize, speed: f64) -> Self {
        ClusterState {
            slot: 0,
            machine_count,
            speed,
            running: Vec::new(),
            alive_jobs: BTreeSet::new(),
            pending_map: BTreeMap::new(),
            pending_reduce: BTreeMap::new(),
            completed: BTreeMap::new(),
        }
    }

    pub fn free_machines(&self) -> usize {
        self.machine_count.saturating_sub(self.running.len())
    }

    /// Number of machines currently held by `job` (blocked copies included).
    pub fn job_occupancy(&self, job: &JobId) -> u32 {
        self.running.iter().filter(|c| &c.task.job == job).count() as u32
    }

    pub fn pending_map_of(&self, job: &JobId) -> u32 {
        self.pending_map.get(job).copied().unwrap_or(0)
    }

    pub fn pending_reduce_of(&self, job: &JobId) -> u32 {
        self.pending_reduce.get(job).copied().unwrap_or(0)
    }
}

/// Effective workload of a job in machine-seconds: each pending task costs
/// its phase mean plus `risk` standard deviations, summed over both phases.
///
///   `pending_map * (E_m + r*sd_m) + pending_reduce * (E_r + r*sd_r)`
pub fn effective_workload(
    map: PhaseMoments,
    pending_map: u32,
    reduce: PhaseMoments,
    pending_reduce: u32,
    risk: RiskFactor,
) -> Result<f64, CoreError> {
    for (phase, m) in [("map", map), ("reduce", reduce)] {
        if !(m.mean_s >= 0.0 && m.mean_s.is_finite() && m.sd_s >= 0.0 && m.sd_s.is_finite()) {
            return Err(CoreError::ContractViolation(format!(
                "{phase} moments must be finite and non-negative (mean={}, sd={})",
                m.mean_s, m.sd_s
            )));
        }
    }
    let r = risk.value();
    Ok(pending_map as f64 * (map.mean_s + r * map.sd_s)
        + pending_reduce as f64 * (reduce.mean_s + r * reduce.sd_s))
}

/// Scheduling priority `weight / effective_workload`; larger runs first.
/// Zero workload means the job has nothing left to price — a distinct error
/// so callers can drop the job rather than treat it as infinitely urgent.
pub fn priority(weight: f64, effective_workload_s: f64, job: &JobId) -> Result<f64, CoreError> {
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(CoreError::ContractViolation(format!(
            "weight must be positive and finite (got {weight})"
        )));
    }
    if !(effective_workload_s >= 0.0 && effective_workload_s.is_finite()) {
        return Err(CoreError::ContractViolation(format!(
            "effective workload must be finite and non-negative (got {effective_workload_s})"
        )));
    }
    if effective_workload_s == 0.0 {
        return Err(CoreError::ZeroEffectiveWorkload(job.clone()));
    }
    Ok(weight / effective_workload_s)
}

/// Sort key for scheduling order: descending `weight/workload`, ties broken
/// by ascending job id. Comparisons cross-multiply so rational ties are exact.
#[derive(Debug, Clone)]
pub struct JobPriority {
    pub job_id: JobId,
    pub weight: f64,
    pub workload_s: f64,
}

impl JobPriority {
    pub fn value(&self) -> f64 {
        self.weight / self.workload_s
    }
}

/// `Ordering::Less` means `a` schedules before `b`.
pub fn priority_order(a: &JobPriority, b: &JobPriority) -> std::cmp::Ordering {
    // a.weight/a.workload > b.weight/b.workload  <=>  cross-products compare.
    let left = a.weight * b.workload_s;
    let right = b.weight * a.workload_s;
    right
        .total_cmp(&left)
        .then_with(|| a.job_id.cmp(&b.job_id))
}

/// Total effective workload of jobs whose priority is at least the target's
/// (non-strict, so the target itself and exact ties are included). `jobs` are
/// `(weight, effective_workload)` pairs.
pub fn higher_priority_backlog(jobs: &[(f64, f64)], target: usize) -> Result<f64, CoreError> {
    if target >= jobs.len() {
        return Err(CoreError::TargetOutOfRange {
            index: target,
            len: jobs.len(),
        });
    }
    for &(w, phi) in jobs {
        if !(w > 0.0 && w.is_finite() && phi > 0.0 && phi.is_finite()) {
            return Err(CoreError::ContractViolation(format!(
                "backlog requires positive finite (weight, workload) pairs (got ({w}, {phi}))"
            )));
        }
    }
    let (wt, pt) = jobs[target];
    // w_j/phi_j >= wt/pt  <=>  w_j * pt >= wt * phi_j  (all positive).
    Ok(jobs
        .iter()
        .filter(|&&(w, phi)| w * pt >= wt * phi)
        .map(|&(_, phi)| phi)
        .sum())
}

/// Per-job flowtime guarantee under the offline bulk scheduler.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FlowtimeBound {
    /// `E_r + r*sd_r + backlog/M`, in seconds.
    pub bound_s: f64,
    /// Probability floor `1 + 1/r^4 - 2/r^2`, clamped to [0, 1].
    pub min_probability: f64,
    /// Set when `r <= 1`: the floor degenerates to 0 and the bound, while
    /// still returned, guarantees nothing.
    pub trivial_probability: bool,
}

/// Flowtime bound for one job: its final reduce round hedged by `r`
/// standard deviations, plus its share of the higher-priority backlog spread
/// over `machines`.
pub fn flowtime_bound(
    reduce: PhaseMoments,
    backlog_s: f64,
    machines: usize,
    risk: RiskFactor,
) -> Result<FlowtimeBound, CoreError> {
    if machines < 1 {
        return Err(CoreError::ContractViolation(
            "machine count must be >= 1".into(),
        ));
    }
    if !(reduce.mean_s >= 0.0 && reduce.mean_s.is_finite())
        || !(reduce.sd_s >= 0.0 && reduce.sd_s.is_finite())
    {
        return Err(CoreError::ContractViolation(format!(
            "reduce moments must be finite and non-negative (mean={}, sd={})",
            reduce.mean_s, reduce.sd_s
        )));
    }
    if !(backlog_s >= 0.0 && backlog_s.is_finite()) {
        return Err(CoreError::ContractViolation(format!(
            "backlog must be finite and non-negative (got {backlog_s})"
        )));
    }
    let r = risk.value();
    let bound_s = reduce.mean_s + r * reduce.sd_s + backlog_s / machines as f64;
    let raw = 1.0 + 1.0 / r.powi(4) - 2.0 / r.powi(2);
    let min_probability = if r <= 1.0 { 0.0 } else { raw.clamp(0.0, 1.0) };
    Ok(FlowtimeBound {
        bound_s,
        min_probability,
        trivial_probability: r <= 1.0,
    })
}
