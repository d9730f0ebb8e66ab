//! Weight-proportional fair sharing without cloning.
//!
//! Every slot each job with unscheduled work is entitled to
//! `weight / total weight` of the cluster; grants are capped at one copy per
//! schedulable task, so surplus machines sit idle rather than clone. This is
//! the epsilon = 1 share rule with cloning disabled — the plain-fairness
//! baseline the cloning policies are measured against.

use rand_chacha::ChaCha8Rng;

use crate::core::RiskFactor;
use crate::engine::{ClusterView, LaunchDirective, Scheduler, SchedulerError};

use super::{decision_rng, share_driven_pass, PolicyError, PolicyKind, PolicyParams};

pub struct FairScheduler {
    risk: RiskFactor,
    rng: ChaCha8Rng,
}

impl FairScheduler {
    pub fn new(params: &PolicyParams, seed: u64) -> Result<Self, PolicyError> {
        params.validate()?;
        Ok(FairScheduler {
            risk: params.risk_factor()?,
            rng: decision_rng(seed, PolicyKind::Fair),
        })
    }
}

impl Scheduler for FairScheduler {
    fn name(&self) -> &'static str {
        PolicyKind::Fair.name()
    }

    fn decide(&mut self, view: &ClusterView<'_>) -> Result<Vec<LaunchDirective>, SchedulerError> {
        let (directives, _) = share_driven_pass(view, 1.0, self.risk, false, &mut self.rng)?;
        Ok(directives)
    }
}
