//! Slot-by-slot cluster simulation.
//!
//! Each slot (one second) proceeds as: admit arrivals, ask the scheduler for
//! launch directives, launch copies on free machines, advance unblocked
//! copies by `speed` seconds, then settle completions. A task finishes when
//! its first copy's remaining work reaches zero; sibling copies are cancelled
//! and their machines become free at the end of the slot. Reduce copies may
//! be launched early but stay blocked (occupying their machine, making no
//! progress) until every map task of the job has finished. Machines are
//! never preempted: a launched copy holds its machine until its task ends.
//!
//! All randomness is drawn from substreams keyed by (seed, job, task, copy
//! ordinal), so a given copy's workload is identical across schedulers,
//! speeds, and unrelated configuration changes.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::core::{
    ClusterState, CopyInstance, FlowtimeRecord, JobId, JobSpec, Phase, TaskRef,
};
use crate::stochastic::{stable_hash64, substream, DurationDistribution, StreamDomain};

/// Remaining work at or below this is treated as finished (guards float dust
/// from fractional speeds).
const COMPLETION_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SchedulerError {
    #[error("scheduler contract violation: {0}")]
    Contract(String),
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("workload is empty")]
    EmptyWorkload,
    #[error("duplicate job id {0}")]
    DuplicateJobId(JobId),
    #[error("invalid workload: {0}")]
    InvalidWorkload(String),
    #[error(
        "slot {slot}: scheduler requested {requested} copies with only {free} machines free"
    )]
    Oversubscription {
        slot: u64,
        requested: usize,
        free: usize,
    },
    #[error("slot {slot}: invalid directive: {reason}")]
    InvalidDirective { slot: u64, reason: String },
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error("horizon of {max_slots} slots exhausted with {unfinished} jobs unfinished")]
    HorizonExhausted {
        max_slots: u64,
        unfinished: usize,
        partial: Box<SimulationResult>,
    },
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub machine_count: usize,
    /// Seconds of work a copy completes per slot; >= 1 models a uniformly
    /// faster cluster.
    pub speed: f64,
    /// Hard slot cap; exceeding it aborts the run with partial results.
    pub max_slots: u64,
    pub seed: u64,
    /// Cancel sibling copies the moment a task's first copy finishes.
    pub cancel_siblings: bool,
    /// Collect per-slot invariant checks into an [`AuditReport`].
    pub audit: bool,
}

impl SimulationConfig {
    pub fn new(machine_count: usize, seed: u64) -> Self {
        SimulationConfig {
            machine_count,
            speed: 1.0,
            max_slots: 10_000_000,
            seed,
            cancel_siblings: true,
            audit: false,
        }
    }

    fn validate(&self) -> Result<(), EngineError> {
        if self.machine_count < 1 {
            return Err(EngineError::InvalidConfig(
                "machine_count must be >= 1".into(),
            ));
        }
        if !(self.speed >= 1.0 && self.speed.is_finite()) {
            return Err(EngineError::InvalidConfig(format!(
                "speed must be finite and >= 1 (got {})",
                self.speed
            )));
        }
        Ok(())
    }
}

/// Scheduler request: launch `copies` copies of `task`, one machine each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaunchDirective {
    pub task: TaskRef,
    pub copies: u32,
}

/// Slot-level MAP/REDUCE machine occupancy (blocked copies count — they hold
/// machines). Idle slots are omitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotUtilization {
    pub slot: u64,
    pub map_running: u32,
    pub reduce_running: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobOutcome {
    pub job_id: JobId,
    pub arrival_slot: u64,
    /// Second boundary at which the job's last task finished.
    pub completion_slot: u64,
    pub flowtime_s: u64,
    pub weight: f64,
}

/// Invariant violations observed during an audited run. A correct engine
/// reports zeros; the counters exist so integration tests can prove it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AuditReport {
    /// Slots where running copies exceeded the machine count.
    pub capacity_violations: u64,
    /// Copies that progressed while their job still had unfinished maps.
    pub precedence_violations: u64,
    /// Copies left running after their task had already completed.
    pub cancellation_violations: u64,
}

impl AuditReport {
    pub fn clean(&self) -> bool {
        self.capacity_violations == 0
            && self.precedence_violations == 0
            && self.cancellation_violations == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    /// One entry per completed job, ascending job id.
    pub outcomes: Vec<JobOutcome>,
    pub utilization: Vec<SlotUtilization>,
    /// Copies beyond the first launched per task (includes straggler backups).
    pub clone_copies: u64,
    pub slots_executed: u64,
    pub total_jobs: usize,
    /// Jobs still unfinished when the run stopped (empty on success).
    pub unfinished: Vec<JobId>,
    pub audit: Option<AuditReport>,
}

impl SimulationResult {
    pub fn complete(&self) -> bool {
        self.unfinished.is_empty()
    }

    pub fn outcome(&self, job: &JobId) -> Option<&JobOutcome> {
        self.outcomes.iter().find(|o| &o.job_id == job)
    }
}

/// Read-only view handed to schedulers each slot.
pub struct ClusterView<'a> {
    state: &'a ClusterState,
    jobs: &'a BTreeMap<JobId, JobRuntime>,
    occupancy: &'a BTreeMap<JobId, u32>,
}

/// Live scheduling facts about one alive job.
pub struct JobSnapshot<'a> {
    pub spec: &'a JobSpec,
    /// Map task indices with no copy launched yet.
    pub unscheduled_map: Vec<u32>,
    pub unscheduled_reduce: Vec<u32>,
    /// True once every map task of the job has finished.
    pub map_phase_complete: bool,
    /// Machines currently held by this job.
    pub occupancy: u32,
}

/// Observable progress of one running copy (no peeking at the sampled total).
#[derive(Debug, Clone, PartialEq)]
pub struct CopyProgress {
    pub task: TaskRef,
    /// Seconds of work completed so far.
    pub elapsed_work_s: f64,
    pub blocked: bool,
}

impl<'a> ClusterView<'a> {
    pub fn slot(&self) -> u64 {
        self.state.slot
    }

    pub fn machine_count(&self) -> usize {
        self.state.machine_count
    }

    pub fn free_machines(&self) -> usize {
        self.state.free_machines()
    }

    pub fn speed(&self) -> f64 {
        self.state.speed
    }

    pub fn state(&self) -> &ClusterState {
        self.state
    }

    /// Alive (arrived, unfinished) jobs in ascending id order.
    pub fn job_ids(&self) -> impl Iterator<Item = &JobId> + '_ {
        self.state.alive_jobs.iter()
    }

    pub fn job(&self, id: &JobId) -> Option<JobSnapshot<'a>> {
        if !self.state.alive_jobs.contains(id) {
            return None;
        }
        let rt = self.jobs.get(id)?;
        Some(JobSnapshot {
            spec: &rt.spec,
            unscheduled_map: rt.unscheduled(Phase::Map),
            unscheduled_reduce: rt.unscheduled(Phase::Reduce),
            map_phase_complete: rt.maps_done == rt.spec.map_count,
            occupancy: self.occupancy.get(id).copied().unwrap_or(0),
        })
    }

    /// Progress of every running copy, in launch order.
    pub fn running_progress(&self) -> Vec<CopyProgress> {
        self.state
            .running
            .iter()
            .map(|c| CopyProgress {
                task: c.task.clone(),
                elapsed_work_s: c.sampled_workload_s - c.remaining_s,
                blocked: c.blocked,
            })
            .collect()
    }
}

/// A scheduling policy. `decide` is called once per slot whenever machines
/// are free and work exists; directives exceeding the free machine count are
/// a fatal contract violation.
pub trait Scheduler {
    fn name(&self) -> &'static str;
    fn decide(&mut self, view: &ClusterView<'_>) -> Result<Vec<LaunchDirective>, SchedulerError>;
}

/// Workload draw for one copy identity. Exposed so tests can assert the
/// common-random-numbers contract: the draw depends only on (seed, job,
/// phase, index, ordinal) — never on the scheduler, speed, or slot.
pub fn sample_copy_workload(
    seed: u64,
    job: &JobId,
    phase: Phase,
    index: u32,
    ordinal: u32,
    dist: &DurationDistribution,
) -> f64 {
    let mut rng = substream(
        seed,
        StreamDomain::CopyWorkload,
        [
            stable_hash64(job.as_str()),
            (phase.tag() << 32) | index as u64,
            ordinal as u64,
        ],
    );
    dist.sample(&mut rng)
}

#[derive(Debug, Clone, Copy, Default)]
struct TaskEntry {
    /// Lifetime copies launched; doubles as the next copy ordinal.
    launched: u32,
    done: bool,
}

#[derive(Debug)]
struct JobRuntime {
    spec: JobSpec,
    maps_done: u32,
    reduces_done: u32,
    map_tasks: Vec<TaskEntry>,
    reduce_tasks: Vec<TaskEntry>,
}

impl JobRuntime {
    fn new(spec: JobSpec) -> Self {
        let map_tasks = vec![TaskEntry::default(); spec.map_count as usize];
        let reduce_tasks = vec![TaskEntry::default(); spec.reduce_count as usize];
        JobRuntime {
            spec,
            maps_done: 0,
            reduces_done: 0,
            map_tasks,
            reduce_tasks,
        }
    }

    fn tasks(&self, phase: Phase) -> &[TaskEntry] {
        match phase {
            Phase::Map => &self.map_tasks,
            Phase::Reduce => &self.reduce_tasks,
        }
    }

    fn tasks_mut(&mut self, phase: Phase) -> &mut [TaskEntry] {
        match phase {
            Phase::Map => &mut self.map_tasks,
            Phase::Reduce => &mut self.reduce_tasks,
        }
    }

    fn unscheduled(&self, phase: Phase) -> Vec<u32> {
        self.tasks(phase)
            .iter()
            .enumerate()
            .filter(|(_, t)| t.launched == 0)
            .map(|(i, _)| i as u32)
            .collect()
    }

    fn finished(&self) -> bool {
        self.maps_done == self.spec.map_count && self.reduces_done == self.spec.reduce_count
    }
}

/// Run `scheduler` over `jobs` until every job completes or the horizon is
/// exhausted. Results are bit-identical for identical inputs.
pub fn run(
    jobs: &[JobSpec],
    scheduler: &mut dyn Scheduler,
    config: &SimulationConfig,
) -> Result<SimulationResult, EngineError> {
    config.validate()?;
    if jobs.is_empty() {
        return Err(EngineError::EmptyWorkload);
    }
    let mut runtimes: BTreeMap<JobId, JobRuntime> = BTreeMap::new();
    for spec in jobs {
        spec.validate()
            .map_err(|e| EngineError::InvalidWorkload(e.to_string()))?;
        if runtimes
            .insert(spec.job_id.clone(), JobRuntime::new(spec.clone()))
            .is_some()
        {
            return Err(EngineError::DuplicateJobId(spec.job_id.clone()));
        }
    }

    // Arrivals ascending (slot, job id).
    let mut arrivals: Vec<(u64, JobId)> = jobs
        .iter()
        .map(|s| (s.arrival_slot, s.job_id.clone()))
        .collect();
    arrivals.sort();
    let mut next_arrival = 0usize;

    let mut state = ClusterState::new(config.machine_count, config.speed);
    let mut occupancy: BTreeMap<JobId, u32> = BTreeMap::new();
    let mut free_pool: BTreeSet<u32> = (0..config.machine_count as u32).collect();
    let mut utilization: Vec<SlotUtilization> = Vec::new();
    let mut clone_copies: u64 = 0;
    let mut completed_count = 0usize;
    let mut audit = config.audit.then(AuditReport::default);

    while state.slot < config.max_slots && completed_count < runtimes.len() {
        // Fast-forward through dead time when the cluster is empty.
        if state.running.is_empty()
            && state.alive_jobs.is_empty()
            && next_arrival < arrivals.len()
        {
            state.slot = state.slot.max(arrivals[next_arrival].0);
            if state.slot >= config.max_slots {
                break;
            }
        }

        // Admit arrivals.
        while next_arrival < arrivals.len() && arrivals[next_arrival].0 <= state.slot {
            let id = arrivals[next_arrival].1.clone();
            let rt = &runtimes[&id];
            state.alive_jobs.insert(id.clone());
            state.pending_map.insert(id.clone(), rt.spec.map_count);
            state
                .pending_reduce
                .insert(id.clone(), rt.spec.reduce_count);
            next_arrival += 1;
        }

        // Ask the scheduler and launch.
        if !state.alive_jobs.is_empty() && !free_pool.is_empty() {
            let directives = {
                let view = ClusterView {
                    state: &state,
                    jobs: &runtimes,
                    occupancy: &occupancy,
                };
                scheduler.decide(&view)?
            };
            let requested: usize = directives.iter().map(|d| d.copies as usize).sum();
            if requested > free_pool.len() {
                return Err(EngineError::Oversubscription {
                    slot: state.slot,
                    requested,
                    free: free_pool.len(),
                });
            }
            for d in directives {
                let slot = state.slot;
                let rt = runtimes.get_mut(&d.task.job).ok_or_else(|| {
                    EngineError::InvalidDirective {
                        slot,
                        reason: format!("unknown job {}", d.task.job),
                    }
                })?;
                if !state.alive_jobs.contains(&d.task.job) {
                    return Err(EngineError::InvalidDirective {
                        slot,
                        reason: format!("job {} is not alive", d.task.job),
                    });
                }
                if d.copies < 1 {
                    return Err(EngineError::InvalidDirective {
                        slot,
                        reason: format!("directive for {} requests zero copies", d.task),
                    });
                }
                let count = rt.tasks(d.task.phase).len() as u32;
                if d.task.index >= count {
                    return Err(EngineError::InvalidDirective {
                        slot,
                        reason: format!("task {} out of range ({count} tasks)", d.task),
                    });
                }
                let maps_unfinished = rt.maps_done < rt.spec.map_count;
                let dist = match d.task.phase {
                    Phase::Map => rt.spec.map_dist.clone(),
                    Phase::Reduce => rt.spec.reduce_dist.clone(),
                };
                let entry = &mut rt.tasks_mut(d.task.phase)[d.task.index as usize];
                if entry.done {
                    return Err(EngineError::InvalidDirective {
                        slot,
                        reason: format!("task {} already completed", d.task),
                    });
                }
                if entry.launched == 0 {
                    // First copy: the task leaves the unscheduled pool; any
                    // further copies of it count as clones.
                    let pending = match d.task.phase {
                        Phase::Map => state.pending_map.get_mut(&d.task.job),
                        Phase::Reduce => state.pending_reduce.get_mut(&d.task.job),
                    };
                    *pending.expect("alive job has pending counters") -= 1;
                    clone_copies += (d.copies - 1) as u64;
                } else {
                    clone_copies += d.copies as u64;
                }
                let first_ordinal = entry.launched;
                entry.launched += d.copies;
                for ordinal in first_ordinal..first_ordinal + d.copies {
                    let workload = sample_copy_workload(
                        config.seed,
                        &d.task.job,
                        d.task.phase,
                        d.task.index,
                        ordinal,
                        &dist,
                    );
                    let machine = *free_pool.iter().next().expect("capacity checked");
                    free_pool.remove(&machine);
                    state.running.push(CopyInstance {
                        task: d.task.clone(),
                        machine,
                        sampled_workload_s: workload,
                        remaining_s: workload,
                        started_slot: state.slot,
                        blocked: d.task.phase == Phase::Reduce && maps_unfinished,
                    });
                    *occupancy.entry(d.task.job.clone()).or_insert(0) += 1;
                }
            }
        }

        // Record occupancy for the slot.
        if !state.running.is_empty() {
            let maps = state
                .running
                .iter()
                .filter(|c| c.task.phase == Phase::Map)
                .count() as u32;
            utilization.push(SlotUtilization {
                slot: state.slot,
                map_running: maps,
                reduce_running: state.running.len() as u32 - maps,
            });
        }

        if let Some(a) = audit.as_mut() {
            if state.running.len() > state.machine_count {
                a.capacity_violations += 1;
            }
            for c in &state.running {
                let rt = &runtimes[&c.task.job];
                let maps_unfinished = rt.maps_done < rt.spec.map_count;
                if c.task.phase == Phase::Reduce && maps_unfinished && !c.blocked {
                    a.precedence_violations += 1;
                }
            }
        }

        // Advance unblocked copies.
        for c in state.running.iter_mut() {
            if !c.blocked {
                c.remaining_s -= state.speed;
            }
        }

        // Settle completions: first copy at or below zero finishes its task.
        let mut finished_tasks: Vec<TaskRef> = Vec::new();
        for c in &state.running {
            if c.remaining_s <= COMPLETION_EPS {
                let entry = &runtimes[&c.task.job].tasks(c.task.phase)[c.task.index as usize];
                if !entry.done && !finished_tasks.contains(&c.task) {
                    finished_tasks.push(c.task.clone());
                }
            }
        }
        for task in &finished_tasks {
            let rt = runtimes.get_mut(&task.job).expect("known job");
            rt.tasks_mut(task.phase)[task.index as usize].done = true;
            match task.phase {
                Phase::Map => rt.maps_done += 1,
                Phase::Reduce => rt.reduces_done += 1,
            }
        }
        // Release machines: finished copies always leave; siblings of a
        // completed task leave too when cancellation is on.
        state.running.retain(|c| {
            let entry = &runtimes[&c.task.job].tasks(c.task.phase)[c.task.index as usize];
            let finished = c.remaining_s <= COMPLETION_EPS;
            let cancelled = config.cancel_siblings && entry.done;
            if finished || cancelled {
                free_pool.insert(c.machine);
                let occ = occupancy.get_mut(&c.task.job).expect("occupied job");
                *occ -= 1;
                false
            } else {
                true
            }
        });

        if let Some(a) = audit.as_mut() {
            if config.cancel_siblings {
                for c in &state.running {
                    let entry =
                        &runtimes[&c.task.job].tasks(c.task.phase)[c.task.index as usize];
                    if entry.done {
                        a.cancellation_violations += 1;
                    }
                }
            }
        }

        // Unblock reduces of jobs whose map phase finished this slot, and
        // retire completed jobs.
        let mut completed_jobs: Vec<JobId> = Vec::new();
        for task in &finished_tasks {
            let rt = &runtimes[&task.job];
            if task.phase == Phase::Map && rt.maps_done == rt.spec.map_count {
                for c in state.running.iter_mut() {
                    if c.task.job == task.job && c.task.phase == Phase::Reduce {
                        c.blocked = false;
                    }
                }
            }
            if rt.finished() && !completed_jobs.contains(&task.job) {
                completed_jobs.push(task.job.clone());
            }
        }
        for id in completed_jobs {
            let rt = &runtimes[&id];
            state.alive_jobs.remove(&id);
            state.pending_map.remove(&id);
            state.pending_reduce.remove(&id);
            state.completed.insert(
                id.clone(),
                FlowtimeRecord {
                    arrival_slot: rt.spec.arrival_slot,
                    completion_slot: state.slot + 1,
                    weight: rt.spec.weight,
                },
            );
            completed_count += 1;
        }

        state.slot += 1;
    }

    let outcomes: Vec<JobOutcome> = state
        .completed
        .iter()
        .map(|(id, rec)| JobOutcome {
            job_id: id.clone(),
            arrival_slot: rec.arrival_slot,
            completion_slot: rec.completion_slot,
            flowtime_s: rec.flowtime_slots(),
            weight: rec.weight,
        })
        .collect();
    let unfinished: Vec<JobId> = runtimes
        .iter()
        .filter(|(_, rt)| !rt.finished())
        .map(|(id, _)| id.clone())
        .collect();
    let result = SimulationResult {
        outcomes,
        utilization,
        clone_copies,
        slots_executed: state.slot,
        total_jobs: runtimes.len(),
        unfinished,
        audit,
    };
    if result.complete() {
        Ok(result)
    } else {
        Err(EngineError::HorizonExhausted {
            max_slots: config.max_slots,
            unfinished: result.unfinished.len(),
            partial: Box::new(result),
        })
    }
}
