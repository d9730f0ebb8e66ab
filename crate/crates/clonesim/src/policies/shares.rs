//! Epsilon-skewed machine shares.
//!
//! Jobs are ranked by priority (weight over remaining effective workload,
//! descending) and the top epsilon-fraction of total weight — measured along
//! that ranking — splits the whole cluster in proportion to weight. Formally,
//! with `W` the total weight, `W_i` the suffix weight from job `i` to the end
//! of the ranking, and `M` machines:
//!
//! * `W_i - w_i >= (1 - eps) * W` — job i sits fully inside the served
//!   prefix: entitlement `w_i * M / (eps * W)`;
//! * `W_i < (1 - eps) * W` — fully outside: entitlement 0;
//! * otherwise the job straddles the cutoff and gets the pro-rated remainder
//!   `(W_i - (1 - eps) * W) * M / (eps * W)`.
//!
//! Suffix sums run over the full deterministic ranking (ties included), so
//! entitlements always telescope to exactly `M`. At `eps = 1` the cutoff
//! vanishes and every job gets the weight-proportional share `w_i * M / W`;
//! as `eps -> 0` the whole cluster concentrates on the single top job.
//!
//! Fractional entitlements are rounded to whole machines by largest
//! remainder, which preserves the sum exactly and never moves any job by a
//! full machine.

use crate::core::{priority_order, JobId, JobPriority};

use super::PolicyError;

/// One job's slice of the cluster for the current slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareEntry {
    pub job_id: JobId,
    pub weight: f64,
    /// Remaining effective workload the ranking was computed from.
    pub workload_s: f64,
    /// Fractional machine entitlement in `[0, M]`.
    pub entitlement: f64,
    /// Whole-machine grant after largest-remainder rounding.
    pub rounded: u32,
}

/// Shares for every job with unscheduled work, in priority order.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareVector {
    entries: Vec<ShareEntry>,
    machines: usize,
}

impl ShareVector {
    /// Entries in descending priority order (ties broken by job id).
    pub fn entries(&self) -> &[ShareEntry] {
        &self.entries
    }

    pub fn machines(&self) -> usize {
        self.machines
    }

    pub fn get(&self, job: &JobId) -> Option<&ShareEntry> {
        self.entries.iter().find(|e| &e.job_id == job)
    }

    pub fn entitlement_sum(&self) -> f64 {
        self.entries.iter().map(|e| e.entitlement).sum()
    }

    pub fn rounded_sum(&self) -> u32 {
        self.entries.iter().map(|e| e.rounded).sum()
    }
}

/// Compute the share vector for `alive` jobs given as
/// `(job id, weight, remaining effective workload)` triples.
pub fn srptms_shares(
    alive: &[(JobId, f64, f64)],
    epsilon: f64,
    machines: usize,
) -> Result<ShareVector, PolicyError> {
    if alive.is_empty() {
        return Err(PolicyError::Contract(
            "share computation requires at least one job".into(),
        ));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(PolicyError::InvalidParameter(format!(
            "epsilon must be in (0, 1] (got {epsilon})"
        )));
    }
    if machines == 0 {
        return Err(PolicyError::InvalidParameter(
            "machines must be >= 1".into(),
        ));
    }
    let mut ranked = Vec::with_capacity(alive.len());
    for (id, weight, workload) in alive {
        if !(weight.is_finite() && *weight > 0.0) {
            return Err(PolicyError::Contract(format!(
                "job {id} has non-positive weight {weight}"
            )));
        }
        if !(workload.is_finite() && *workload > 0.0) {
            return Err(PolicyError::Contract(format!(
                "job {id} has non-positive remaining workload {workload}"
            )));
        }
        ranked.push(JobPriority {
            job_id: id.clone(),
            weight: *weight,
            workload_s: *workload,
        });
    }
    ranked.sort_by(priority_order);
    if ranked.windows(2).any(|w| w[0].job_id == w[1].job_id) {
        return Err(PolicyError::Contract("duplicate job id in share input".into()));
    }

    // Suffix weights from the bottom of the ranking up, so tail/below pairs
    // telescope exactly: below[i] == tail[i + 1].
    let n = ranked.len();
    let mut tail = vec![0.0f64; n];
    let mut below = vec![0.0f64; n];
    let mut running = 0.0f64;
    for i in (0..n).rev() {
        below[i] = running;
        running += ranked[i].weight;
        tail[i] = running;
    }
    let total = running;
    let cutoff = (1.0 - epsilon) * total;
    let denom = epsilon * total;
    let m = machines as f64;

    let mut entries: Vec<ShareEntry> = ranked
        .into_iter()
        .enumerate()
        .map(|(i, jp)| {
            let entitlement = if below[i] >= cutoff {
                jp.weight * m / denom
            } else if tail[i] < cutoff {
                0.0
            } else {
                ((tail[i] - cutoff) * m / denom).max(0.0)
            };
            ShareEntry {
                job_id: jp.job_id,
                weight: jp.weight,
                workload_s: jp.workload_s,
                entitlement,
                rounded: 0,
            }
        })
        .collect();

    // Largest-remainder rounding: floors first, then hand out the leftover
    // machines by descending fractional part, preferring higher priority on
    // ties. The floors can never exceed `machines`, and the leftover never
    // exceeds the number of jobs, but a cyclic walk keeps this robust to
    // last-ulp drift in the entitlements.
    let mut used: u64 = 0;
    for e in entries.iter_mut() {
        let f = e.entitlement.floor();
        e.rounded = f as u32;
        used += f as u64;
    }
    let mut leftover = (machines as u64).saturating_sub(used);
    if leftover > 0 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let ra = entries[a].entitlement - entries[a].entitlement.floor();
            let rb = entries[b].entitlement - entries[b].entitlement.floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let mut cursor = 0;
        while leftover > 0 {
            entries[order[cursor % n]].rounded += 1;
            cursor += 1;
            leftover -= 1;
        }
    }

    Ok(ShareVector { entries, machines })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn jid(s: &str) -> JobId {
        JobId::new(s)
    }

    /// Worked example: weights (1, 1, 2) in priority order, eps = 0.5,
    /// M = 10. Total weight 4, cutoff 2, denom 2: the top job is fully
    /// served (5 machines), the second straddles the cutoff (5), the third
    /// falls outside (0).
    #[test]
    fn three_job_skewed_shares() {
        let alive = vec![
            (jid("a"), 1.0, 10.0),
            (jid("b"), 1.0, 20.0),
            (jid("c"), 2.0, 100.0),
        ];
        let shares = srptms_shares(&alive, 0.5, 10).unwrap();
        let ids: Vec<&str> = shares.entries().iter().map(|e| e.job_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        let ents: Vec<f64> = shares.entries().iter().map(|e| e.entitlement).collect();
        assert_eq!(ents, [5.0, 5.0, 0.0]);
        let rounded: Vec<u32> = shares.entries().iter().map(|e| e.rounded).collect();
        assert_eq!(rounded, [5, 5, 0]);
    }

    /// eps = 1 must reproduce plain weight-proportional sharing bit for bit.
    #[test]
    fn epsilon_one_is_weight_proportional() {
        let alive = vec![(jid("x"), 3.0, 4.0), (jid("y"), 1.0, 8.0)];
        let shares = srptms_shares(&alive, 1.0, 8).unwrap();
        for e in shares.entries() {
            assert_eq!(e.entitlement, e.weight * 8.0 / 4.0);
        }
        assert_eq!(shares.rounded_sum(), 8);
    }

    /// Equal fractional remainders: the extra machine goes to the higher
    /// priority job.
    #[test]
    fn rounding_tie_prefers_higher_priority() {
        let alive = vec![
            (jid("a"), 1.0, 1.0),
            (jid("b"), 1.0, 2.0),
            (jid("c"), 1.0, 3.0),
        ];
        let shares = srptms_shares(&alive, 1.0, 10).unwrap();
        let rounded: Vec<u32> = shares.entries().iter().map(|e| e.rounded).collect();
        assert_eq!(rounded, [4, 3, 3]);
        assert_eq!(shares.rounded_sum(), 10);
    }

    /// As eps -> 0 the whole cluster concentrates on the top-priority job.
    #[test]
    fn tiny_epsilon_concentrates_on_top_job() {
        let alive = vec![
            (jid("a"), 1.0, 10.0),
            (jid("b"), 1.0, 20.0),
            (jid("c"), 2.0, 100.0),
        ];
        let shares = srptms_shares(&alive, 1e-6, 10).unwrap();
        let rounded: Vec<u32> = shares.entries().iter().map(|e| e.rounded).collect();
        assert_eq!(rounded, [10, 0, 0]);
    }

    #[test]
    fn single_job_gets_whole_cluster() {
        for eps in [0.3, 0.6, 1.0] {
            let shares = srptms_shares(&[(jid("solo"), 5.0, 42.0)], eps, 16).unwrap();
            let e = &shares.entries()[0];
            assert!((e.entitlement - 16.0).abs() < 1e-9 * 16.0);
            assert_eq!(e.rounded, 16);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(srptms_shares(&[], 0.5, 4).is_err());
        let one = vec![(jid("a"), 1.0, 1.0)];
        assert!(srptms_shares(&one, 0.0, 4).is_err());
        assert!(srptms_shares(&one, 1.1, 4).is_err());
        assert!(srptms_shares(&one, 0.5, 0).is_err());
        assert!(srptms_shares(&[(jid("a"), 0.0, 1.0)], 0.5, 4).is_err());
        assert!(srptms_shares(&[(jid("a"), 1.0, 0.0)], 0.5, 4).is_err());
        let dup = vec![(jid("a"), 1.0, 1.0), (jid("a"), 2.0, 2.0)];
        assert!(srptms_shares(&dup, 0.5, 4).is_err());
    }

    proptest! {
        /// Entitlements sum to M (to float tolerance) and the rounded grants
        /// sum to M exactly, for any job mix, epsilon, and cluster size.
        #[test]
        fn shares_conserve_machines(
            weights in prop::collection::vec(0.1f64..100.0, 1..8),
            workloads in prop::collection::vec(0.1f64..1000.0, 8),
            epsilon in 0.01f64..=1.0,
            machines in 1usize..64,
        ) {
            let alive: Vec<(JobId, f64, f64)> = weights
                .iter()
                .enumerate()
                .map(|(i, &w)| (jid(&format!("j{i}")), w, workloads[i]))
                .collect();
            let shares = srptms_shares(&alive, epsilon, machines).unwrap();
            let m = machines as f64;
            prop_assert!((shares.entitlement_sum() - m).abs() <= 1e-9 * m.max(1.0));
            prop_assert_eq!(shares.rounded_sum() as usize, machines);
            for e in shares.entries() {
                prop_assert!(e.entitlement >= 0.0);
                prop_assert!(e.entitlement <= m + 1e-9 * m);
                prop_assert!((e.rounded as f64 - e.entitlement).abs() < 1.0 + 1e-9);
            }
        }
    }
}
