//! Scheduling policies.
//!
//! All policies rank jobs the same way — descending `weight / remaining
//! effective workload`, ties by ascending job id — and differ in how they
//! turn that ranking into machine grants:
//!
//! * [`offline::OfflineBulkSrpt`] — strict priority for bulk (slot-0)
//!   arrivals, one copy per task, computed once up front;
//! * [`srptms::SrptMsClone`] — online epsilon-share scheduler that spends a
//!   job's surplus share on task clones;
//! * [`fair::FairScheduler`] — weight-proportional shares, no cloning;
//! * [`mantri::Mantri`] — fair shares plus reactive straggler backups;
//! * [`sca_lite::ScaLite`] — greedy marginal-gain cloning.

use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::core::{CoreError, JobId, Phase, RiskFactor, TaskRef};
use crate::engine::{ClusterView, JobSnapshot, LaunchDirective, Scheduler, SchedulerError};

pub mod cloning;
pub mod fair;
pub mod mantri;
pub mod offline;
pub mod sca_lite;
pub mod shares;
pub mod srptms;

pub use cloning::task_cloning_assign;
pub use shares::{srptms_shares, ShareEntry, ShareVector};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("invalid policy parameter: {0}")]
    InvalidParameter(String),
    #[error("policy contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl From<PolicyError> for SchedulerError {
    fn from(e: PolicyError) -> Self {
        SchedulerError::Contract(e.to_string())
    }
}

/// Knobs shared across policies; defaults match the evaluation setup
/// (epsilon 0.6, risk 3).
#[derive(Debug, Clone, Copy)]
pub struct PolicyParams {
    /// Share-skew knob in (0, 1]: 1 is weight-proportional fairness, small
    /// values concentrate machines on the highest-priority jobs.
    pub epsilon: f64,
    /// Risk multiplier on duration standard deviations.
    pub risk: f64,
    /// Straggler detector: back up when P(remaining > multiplier * fresh)
    /// exceeds this.
    pub mantri_delta: f64,
    pub mantri_multiplier: f64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            epsilon: 0.6,
            risk: 3.0,
            mantri_delta: 0.25,
            mantri_multiplier: 2.0,
        }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(PolicyError::InvalidParameter(format!(
                "epsilon must be in (0, 1] (got {})",
                self.epsilon
            )));
        }
        if !(self.risk >= 0.0 && self.risk.is_finite()) {
            return Err(PolicyError::InvalidParameter(format!(
                "risk must be finite and >= 0 (got {})",
                self.risk
            )));
        }
        if !(self.mantri_delta > 0.0 && self.mantri_delta < 1.0) {
            return Err(PolicyError::InvalidParameter(format!(
                "mantri_delta must be in (0, 1) (got {})",
                self.mantri_delta
            )));
        }
        if !(self.mantri_multiplier >= 1.0 && self.mantri_multiplier.is_finite()) {
            return Err(PolicyError::InvalidParameter(format!(
                "mantri_multiplier must be >= 1 (got {})",
                self.mantri_multiplier
            )));
        }
        Ok(())
    }

    pub fn risk_factor(&self) -> Result<RiskFactor, PolicyError> {
        RiskFactor::new(self.risk).map_err(PolicyError::from)
    }
}

/// Policy selector, stable names for CLI and config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    SrptMsClone,
    OfflineBulkSrpt,
    Mantri,
    ScaLite,
    Fair,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::SrptMsClone,
        PolicyKind::OfflineBulkSrpt,
        PolicyKind::Mantri,
        PolicyKind::ScaLite,
        PolicyKind::Fair,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::SrptMsClone => "srptms+c",
            PolicyKind::OfflineBulkSrpt => "offline-srpt",
            PolicyKind::Mantri => "mantri",
            PolicyKind::ScaLite => "sca-lite",
            PolicyKind::Fair => "fair",
        }
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "srptms+c" | "srptms-c" | "srptmsc" => Ok(PolicyKind::SrptMsClone),
            "offline-srpt" | "offline" => Ok(PolicyKind::OfflineBulkSrpt),
            "mantri" => Ok(PolicyKind::Mantri),
            "sca-lite" | "sca" => Ok(PolicyKind::ScaLite),
            "fair" => Ok(PolicyKind::Fair),
            other => Err(PolicyError::InvalidParameter(format!(
                "unknown policy '{other}' (expected one of: srptms+c, offline-srpt, mantri, \
                 sca-lite, fair)"
            ))),
        }
    }
}

/// Instantiate a policy with its decision RNG derived from `seed`. The seed
/// also drives the engine's workload draws, so two policies built from the
/// same seed face identical task durations.
pub fn build(
    kind: PolicyKind,
    params: &PolicyParams,
    seed: u64,
) -> Result<Box<dyn Scheduler>, PolicyError> {
    params.validate()?;
    Ok(match kind {
        PolicyKind::SrptMsClone => Box::new(srptms::SrptMsClone::new(params, seed)?),
        PolicyKind::OfflineBulkSrpt => Box::new(offline::OfflineBulkSrpt::new(params, seed)?),
        PolicyKind::Mantri => Box::new(mantri::Mantri::new(params, seed)?),
        PolicyKind::ScaLite => Box::new(sca_lite::ScaLite::new(params, seed)?),
        PolicyKind::Fair => Box::new(fair::FairScheduler::new(params, seed)?),
    })
}

/// Stable per-policy tag mixed into decision RNG stream keys so policies
/// never perturb each other's draws.
pub(crate) fn decision_rng(seed: u64, kind: PolicyKind) -> ChaCha8Rng {
    let tag = match kind {
        PolicyKind::SrptMsClone => 1,
        PolicyKind::OfflineBulkSrpt => 2,
        PolicyKind::Mantri => 3,
        PolicyKind::ScaLite => 4,
        PolicyKind::Fair => 5,
    };
    crate::stochastic::substream(
        seed,
        crate::stochastic::StreamDomain::PolicyDecision,
        [tag, 0, 0],
    )
}

/// Tasks a job may launch right now: maps while any map is unscheduled,
/// reduces only once the whole map phase has *finished*. Between those two
/// states (maps all launched, some still running) nothing is schedulable —
/// online policies never create blocked reduce copies.
pub(crate) fn schedulable_tasks(snap: &JobSnapshot<'_>) -> (Phase, Vec<u32>) {
    if !snap.unscheduled_map.is_empty() {
        (Phase::Map, snap.unscheduled_map.clone())
    } else if snap.map_phase_complete {
        (Phase::Reduce, snap.unscheduled_reduce.clone())
    } else {
        (Phase::Reduce, Vec::new())
    }
}

/// Jobs with unscheduled work as `(id, weight, live effective workload)`,
/// the input to the share computation.
pub(crate) fn jobs_with_unscheduled_work(
    view: &ClusterView<'_>,
    risk: RiskFactor,
) -> Result<Vec<(JobId, f64, f64)>, SchedulerError> {
    let mut alive = Vec::new();
    for id in view.job_ids() {
        let snap = view.job(id).expect("listed job is alive");
        let pending_map = snap.unscheduled_map.len() as u32;
        let pending_reduce = snap.unscheduled_reduce.len() as u32;
        if pending_map + pending_reduce == 0 {
            continue;
        }
        let u = snap
            .spec
            .live_effective_workload(pending_map, pending_reduce, risk)
            .map_err(|e| SchedulerError::Contract(e.to_string()))?;
        alive.push((id.clone(), snap.spec.weight, u));
    }
    Ok(alive)
}

/// Machines a job may claim this slot. Running copies are never preempted,
/// so a job at or above its rounded share gets nothing; below it, the grant
/// is the deficit capped by free machines and — without surplus cloning —
/// by the number of schedulable tasks.
pub(crate) fn grant_for(
    rounded: u32,
    occupancy: u32,
    free: usize,
    schedulable: usize,
    clone_surplus: bool,
) -> usize {
    if occupancy >= rounded || schedulable == 0 {
        return 0;
    }
    let deficit = (rounded - occupancy) as usize;
    let grant = deficit.min(free);
    if clone_surplus {
        grant
    } else {
        grant.min(schedulable)
    }
}

/// One round of share-driven launching: compute entitlements over jobs with
/// unscheduled work, then walk them in priority order granting each its
/// deficit (rounded share minus machines already held). With `clone_surplus`
/// a grant larger than the job's schedulable task count becomes clone
/// copies; otherwise the grant is capped at one copy per task. Returns the
/// directives and the machines left free.
pub(crate) fn share_driven_pass(
    view: &ClusterView<'_>,
    epsilon: f64,
    risk: RiskFactor,
    clone_surplus: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<LaunchDirective>, usize), SchedulerError> {
    let mut free = view.free_machines();
    let alive = jobs_with_unscheduled_work(view, risk)?;
    if alive.is_empty() || free == 0 {
        return Ok((Vec::new(), free));
    }
    let shares = srptms_shares(&alive, epsilon, view.machine_count())
        .map_err(SchedulerError::from)?;
    let mut directives = Vec::new();
    for entry in shares.entries() {
        if free == 0 {
            break;
        }
        let snap = view.job(&entry.job_id).expect("share entry job is alive");
        let (phase, tasks) = schedulable_tasks(&snap);
        let grant = grant_for(entry.rounded, snap.occupancy, free, tasks.len(), clone_surplus);
        if grant == 0 {
            continue;
        }
        let assigned = task_cloning_assign(&tasks, grant as u32, rng);
        let spent: usize = assigned.iter().map(|&(_, c)| c as usize).sum();
        debug_assert_eq!(spent, grant);
        free -= spent;
        directives.extend(assigned.into_iter().map(|(index, copies)| LaunchDirective {
            task: TaskRef {
                job: entry.job_id.clone(),
                phase,
                index,
            },
            copies,
        }));
    }
    Ok((directives, free))
}
