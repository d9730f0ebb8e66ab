//! Spreading a machine grant across a job's unscheduled tasks.
//!
//! A job granted `x` machines launches `x` copies total: one copy each for
//! `x` random distinct tasks when the grant fits, otherwise every task plus
//! clones, keeping per-task copy counts within one of each other. Randomized
//! selection keeps no task systematically starved across slots.

use rand::Rng;

/// Pick `k` distinct elements of `items` uniformly at random, returned in
/// ascending order. Partial Fisher-Yates; `k` must not exceed `items.len()`.
pub(crate) fn select_distinct<R: Rng + ?Sized>(items: &[u32], k: usize, rng: &mut R) -> Vec<u32> {
    debug_assert!(k <= items.len());
    let mut scratch = items.to_vec();
    for i in 0..k {
        let j = rng.random_range(i..scratch.len());
        scratch.swap(i, j);
    }
    scratch.truncate(k);
    scratch.sort_unstable();
    scratch
}

/// Distribute a grant of `budget` copies over `unscheduled` task indices.
///
/// Returns `(task index, copies)` pairs sorted by index whose copy counts
/// sum to exactly `budget` (or to zero when there is nothing to schedule).
/// When `budget <= tasks`, that many distinct tasks get one copy each; when
/// it exceeds the task count, every task gets `budget / tasks` copies and
/// `budget % tasks` random distinct tasks get one more.
pub fn task_cloning_assign<R: Rng + ?Sized>(
    unscheduled: &[u32],
    budget: u32,
    rng: &mut R,
) -> Vec<(u32, u32)> {
    if unscheduled.is_empty() || budget == 0 {
        return Vec::new();
    }
    let count = unscheduled.len() as u32;
    if budget <= count {
        return select_distinct(unscheduled, budget as usize, rng)
            .into_iter()
            .map(|idx| (idx, 1))
            .collect();
    }
    let base = budget / count;
    let extra = (budget % count) as usize;
    let bonus = select_distinct(unscheduled, extra, rng);
    let mut sorted = unscheduled.to_vec();
    sorted.sort_unstable();
    sorted
        .into_iter()
        .map(|idx| {
            let copies = base + u32::from(bonus.binary_search(&idx).is_ok());
            (idx, copies)
        })
        .collect()
}
