//! Online share-based scheduler with task cloning.
//!
//! Every slot: rank jobs with unscheduled work by weight over remaining
//! effective workload, hand out epsilon-skewed machine shares, and let each
//! job spend its share deficit (rounded share minus machines it already
//! holds) on its schedulable tasks. A grant larger than the task count turns
//! into clone copies, so high-priority jobs with few tasks left race several
//! copies of each and keep the earliest finisher. Running copies are never
//! preempted — a job over its share simply receives nothing new.

use rand_chacha::ChaCha8Rng;

use crate::core::RiskFactor;
use crate::engine::{ClusterView, LaunchDirective, Scheduler, SchedulerError};

use super::{decision_rng, share_driven_pass, PolicyError, PolicyKind, PolicyParams};

pub struct SrptMsClone {
    epsilon: f64,
    risk: RiskFactor,
    rng: ChaCha8Rng,
}

impl SrptMsClone {
    pub fn new(params: &PolicyParams, seed: u64) -> Result<Self, PolicyError> {
        params.validate()?;
        Ok(SrptMsClone {
            epsilon: params.epsilon,
            risk: params.risk_factor()?,
            rng: decision_rng(seed, PolicyKind::SrptMsClone),
        })
    }
}

impl Scheduler for SrptMsClone {
    fn name(&self) -> &'static str {
        PolicyKind::SrptMsClone.name()
    }

    fn decide(&mut self, view: &ClusterView<'_>) -> Result<Vec<LaunchDirective>, SchedulerError> {
        let (directives, _) = share_driven_pass(view, self.epsilon, self.risk, true, &mut self.rng)?;
        Ok(directives)
    }
}
