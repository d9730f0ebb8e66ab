//! Time-slotted simulator for task-cloning schedulers on MapReduce-style clusters.
//!
//! A cluster of `M` identical machines serves jobs that each carry a map phase
//! and a reduce phase; reduce tasks cannot make progress until every map task
//! of the same job has finished. Schedulers may launch several copies of a
//! task on different machines, and the first copy to finish completes the task
//! (the remaining copies are cancelled). The crate provides:
//!
//! * [`core`] — job/cluster domain types plus the shortest-remaining-workload
//!   priority arithmetic (effective workload, priority, backlog, flowtime
//!   bound) shared by schedulers and verifiers;
//! * [`stochastic`] — task duration distributions, cloning speedup curves, and
//!   the named substream RNG discipline that keeps runs reproducible;
//! * [`engine`] — the slot-by-slot cluster simulation;
//! * [`policies`] — the offline bulk scheduler, the online epsilon-share
//!   cloning scheduler, and the straggler-detection / greedy-cloning / fair
//!   baselines;
//! * [`workload`] — trace ingestion (CSV) and the calibrated synthetic
//!   generator;
//! * [`metrics`] — flowtime aggregation, CDFs, and CSV/JSON export;
//! * [`verify`] — brute-force optimal schedules for tiny instances, empirical
//!   competitive ratios, and probabilistic flowtime-bound checks.

pub mod cli;
pub mod core;
pub mod engine;
pub mod metrics;
pub mod policies;
pub mod stochastic;
pub mod verify;
pub mod workload;
