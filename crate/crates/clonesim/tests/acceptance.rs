//! Release gate: one test per shipped claim, each printing a PASS/FAIL line
//! (visible with `--nocapture`) and enforcing its own runtime budget.
//!
//! The claims cover the cloning speedup algebra, machine-share accounting,
//! flowtime guarantees of the bulk scheduler, the benchmark comparison
//! against the reactive-backup baseline, engine invariants, and CLI
//! determinism. Tolerances are stated inline next to each assertion.

mod common;

use std::collections::BTreeMap;
use std::panic::AssertUnwindSafe;
use std::process::Command;
use std::time::{Duration, Instant};

use clonesim::core::{higher_priority_backlog, flowtime_bound, JobSpec, RiskFactor};
use clonesim::engine::{run, SimulationConfig};
use clonesim::metrics::{average, summarize};
use clonesim::policies::{build, srptms_shares, PolicyKind, PolicyParams};
use clonesim::stochastic::{
    expected_min_of, validate_speedup, DurationDistribution, SpeedupFunction,
};
use clonesim::verify::{
    check_flowtime_bounds, worst_offline_flowtime, OracleInstance, BOUND_SLACK_S,
};
use clonesim::workload::{gen_synthetic, ArrivalProcess, SyntheticConfig};
use clonesim::core::JobId;
use common::{bulk_reduce_heavy, det_job};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Runs one gate criterion: prints `ACCEPTANCE <n>: PASS/FAIL — <what>`,
/// re-raises any assertion failure, and fails if the body overran its
/// runtime budget.
fn criterion<F>(number: u32, what: &str, budget: Duration, body: F)
where
    F: FnOnce(),
{
    let start = Instant::now();
    let outcome = std::panic::catch_unwind(AssertUnwindSafe(body));
    let elapsed = start.elapsed();
    match outcome {
        Ok(()) if elapsed <= budget => {
            println!("ACCEPTANCE {number}: PASS — {what} ({elapsed:.2?})");
        }
        Ok(()) => {
            println!(
                "ACCEPTANCE {number}: FAIL — {what} overran its {budget:?} budget ({elapsed:.2?})"
            );
            panic!("criterion {number} overran its runtime budget: {elapsed:?} > {budget:?}");
        }
        Err(cause) => {
            println!("ACCEPTANCE {number}: FAIL — {what} ({elapsed:.2?})");
            std::panic::resume_unwind(cause);
        }
    }
}

/// Speedup algebra: s(1) = 1 exactly, s(k) never exceeds k, increments
/// shrink (discrete concavity), s(k)/k never grows, and a 10^6-sample Monte
/// Carlo estimate of E[min of k draws] agrees with the closed form
/// alpha*k*mu/(alpha*k - 1) within 1%.
#[test]
fn acceptance_01_speedup_algebra() {
    criterion(
        1,
        "cloning speedup algebra and Monte Carlo agreement",
        Duration::from_secs(30),
        || {
            for (ai, &alpha) in [2.0f64, 2.5, 3.0].iter().enumerate() {
                let s = SpeedupFunction::Pareto { alpha };
                assert_eq!(s.factor(1).unwrap(), 1.0, "s(1) must be exactly 1");
                let report = validate_speedup(&s, 100).unwrap();
                assert!(
                    report.all_pass(),
                    "speedup curve violations at alpha {alpha}: {:?}",
                    report.failures
                );
                for (mi, &mu) in [1.0f64, 10.0].iter().enumerate() {
                    let dist = DurationDistribution::Pareto { alpha, mu };
                    for &k in &[1u32, 2, 5, 10] {
                        let closed = expected_min_of(
                            &dist,
                            k,
                            &mut ChaCha8Rng::seed_from_u64(0),
                        )
                        .unwrap()
                        .value_s;
                        let exact = alpha * k as f64 * mu / (alpha * k as f64 - 1.0);
                        assert_eq!(closed, exact, "closed form drifted at k={k}");
                        let mut rng = ChaCha8Rng::seed_from_u64(
                            40_000 + (ai as u64) * 100 + (mi as u64) * 10 + k as u64,
                        );
                        let n = 1_000_000u32;
                        let mut sum = 0.0;
                        for _ in 0..n {
                            let mut min = f64::INFINITY;
                            for _ in 0..k {
                                min = min.min(dist.sample(&mut rng));
                            }
                            sum += min;
                        }
                        let mc = sum / f64::from(n);
                        let rel = (mc - exact).abs() / exact;
                        assert!(
                            rel <= 0.01,
                            "Monte Carlo mean {mc} vs {exact} off by {rel:.4} \
                             at alpha={alpha} mu={mu} k={k}"
                        );
                    }
                }
            }
        },
    );
}

/// One randomized share case: up to 500 jobs, integer weights 1–12, positive
/// workloads, cluster of 1–500 machines.
fn share_case(case: u64) -> (Vec<(JobId, f64, f64)>, usize, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(7_100 + case);
    let n = rng.random_range(1..=500usize);
    let machines = rng.random_range(1..=500usize);
    let epsilon = 1.0 - rng.random_range(0.0..1.0); // (0, 1]
    let alive = (0..n)
        .map(|j| {
            (
                JobId::new(format!("j{j:03}")),
                f64::from(rng.random_range(1..=12u32)),
                rng.random_range(0.5..5_000.0f64),
            )
        })
        .collect();
    (alive, machines, epsilon)
}

/// Share conservation: fractional entitlements sum to M within 1e-9
/// relative error and the whole-machine rounding sums to exactly M, over
/// 1000 randomized alive-sets.
#[test]
fn acceptance_02_share_conservation() {
    criterion(
        2,
        "fractional machine shares conserve the cluster exactly",
        Duration::from_secs(10),
        || {
            for case in 0..1_000u64 {
                let (alive, machines, epsilon) = share_case(case);
                let shares = srptms_shares(&alive, epsilon, machines).unwrap();
                let m = machines as f64;
                let err = (shares.entitlement_sum() - m).abs() / m;
                assert!(
                    err <= 1e-9,
                    "case {case}: entitlements sum off by {err:e} (eps {epsilon})"
                );
                assert_eq!(
                    shares.rounded_sum(),
                    machines as u32,
                    "case {case}: rounded shares must sum to the machine count"
                );
            }
        },
    );
}

/// With the share knob at 1 the split degenerates to weighted fair shares:
/// every job gets w*M/W, bit-for-bit (weights are integers, so W is exact).
#[test]
fn acceptance_03_fair_specialization() {
    criterion(
        3,
        "share knob at 1 reduces to weighted fair shares exactly",
        Duration::from_secs(10),
        || {
            for case in 0..1_000u64 {
                let (alive, machines, _) = share_case(case);
                let shares = srptms_shares(&alive, 1.0, machines).unwrap();
                let total: f64 = alive.iter().map(|(_, w, _)| w).sum();
                let m = machines as f64;
                for (id, w, _) in &alive {
                    let got = shares.get(id).unwrap().entitlement;
                    let want = w * m / total;
                    assert_eq!(
                        got, want,
                        "case {case}: job {id} got {got}, fair share is {want}"
                    );
                }
            }
        },
    );
}

/// Deterministic flowtime guarantee: with zero-variance durations every
/// job's flowtime stays within its reduce duration plus its share of the
/// higher-priority backlog, with 2 slots of slotting slack.
#[test]
fn acceptance_04_offline_deterministic_bound() {
    criterion(
        4,
        "zero-variance workloads finish within the per-job flowtime bound",
        Duration::from_secs(30),
        || {
            let risk = RiskFactor::new(3.0).unwrap();
            let mut worst = f64::MIN;
            for seed in 0..10u64 {
                let jobs = bulk_reduce_heavy(50, false, 100 + seed);
                let pairs: Vec<(f64, f64)> = jobs
                    .iter()
                    .map(|j| (j.weight, j.full_effective_workload(risk).unwrap()))
                    .collect();
                let mut sched =
                    build(PolicyKind::OfflineBulkSrpt, &PolicyParams::default(), 7_000 + seed)
                        .unwrap();
                let result =
                    run(&jobs, sched.as_mut(), &SimulationConfig::new(20, 7_000 + seed))
                        .unwrap();
                for (i, job) in jobs.iter().enumerate() {
                    let backlog = higher_priority_backlog(&pairs, i).unwrap();
                    let bound =
                        flowtime_bound(job.reduce_moments(), backlog, 20, risk).unwrap();
                    let flow = result.outcome(&job.job_id).unwrap().flowtime_s as f64;
                    worst = worst.max(flow - bound.bound_s);
                    assert!(
                        flow <= bound.bound_s + BOUND_SLACK_S,
                        "seed {seed} job {}: flowtime {flow} exceeds bound {} + {BOUND_SLACK_S}",
                        job.job_id,
                        bound.bound_s
                    );
                }
            }
            println!("  worst flowtime minus bound: {worst:.3} (slack {BOUND_SLACK_S})");
        },
    );
}

/// Probabilistic flowtime guarantee: on a heavy-tail bulk workload, each
/// job's empirical bound-satisfaction rate over 1000 replications is
/// statistically compatible (Wilson 95% upper limit) with the claimed floor
/// of 1 + 1/r^4 - 2/r^2 = 0.79012 at r = 3.
#[test]
fn acceptance_05_probabilistic_bound() {
    criterion(
        5,
        "heavy-tail workloads meet the probabilistic flowtime floor",
        Duration::from_secs(300),
        || {
            let jobs = bulk_reduce_heavy(30, true, 2024);
            let report =
                check_flowtime_bounds(&jobs, 20, RiskFactor::new(3.0).unwrap(), 1_000, 55).unwrap();
            let mut worst_rate = 1.0f64;
            for check in &report.jobs {
                worst_rate = worst_rate.min(check.empirical_rate);
                assert!(
                    (check.claimed_min_probability - 0.790123).abs() < 1e-6,
                    "claimed floor drifted: {}",
                    check.claimed_min_probability
                );
                assert!(
                    check.pass,
                    "job {}: rate {} (Wilson upper {}) below floor {}",
                    check.job_id,
                    check.empirical_rate,
                    check.wilson_upper_95,
                    check.claimed_min_probability
                );
            }
            assert!(report.overall_pass);
            println!(
                "  worst per-job satisfaction rate: {worst_rate:.4} (floor {:.5})",
                0.790123
            );
        },
    );
}

/// Competitiveness of the bulk scheduler: over every instance with at most
/// 3 unit-weight jobs, integer durations in {1, 2}, at most 6 tasks, and 1–2
/// machines, the worst total flowtime across 20 tie-break seeds stays within
/// twice the brute-force optimum plus one slot per job.
#[test]
fn acceptance_06_offline_competitiveness() {
    criterion(
        6,
        "bulk scheduler within twice the exhaustive optimum plus slotting slack",
        Duration::from_secs(120),
        || {
            // Job shapes (map count, map seconds, reduce count, reduce
            // seconds); reduce-less shapes pin the unused duration to 1.
            type Shape = (u32, u32, u32, u32);
            let mut shapes: Vec<Shape> = Vec::new();
            for m in [1u32, 2] {
                for md in [1u32, 2] {
                    shapes.push((m, md, 0, 1));
                    for rd in [1u32, 2] {
                        shapes.push((m, md, 1, rd));
                    }
                }
            }
            assert_eq!(shapes.len(), 12);
            let mut family: Vec<Vec<Shape>> = Vec::new();
            for a in 0..shapes.len() {
                family.push(vec![shapes[a]]);
                for b in a..shapes.len() {
                    family.push(vec![shapes[a], shapes[b]]);
                    for c in b..shapes.len() {
                        family.push(vec![shapes[a], shapes[b], shapes[c]]);
                    }
                }
            }
            family.retain(|inst| inst.iter().map(|s| s.0 + s.2).sum::<u32>() <= 6);

            let cases: Vec<(usize, Vec<Shape>, u32)> = family
                .into_iter()
                .enumerate()
                .flat_map(|(idx, inst)| {
                    [(idx * 2, inst.clone(), 1u32), (idx * 2 + 1, inst, 2u32)]
                })
                .collect();
            let checked = cases.len();

            let worst_ratio = cases
                .into_par_iter()
                .map(|(idx, inst, machines)| {
                    let jobs: Vec<JobSpec> = inst
                        .iter()
                        .enumerate()
                        .map(|(i, &(m, md, r, rd))| {
                            det_job(
                                &format!("j{i}"),
                                1.0,
                                m,
                                f64::from(md),
                                r,
                                f64::from(rd),
                            )
                        })
                        .collect();
                    let opt = OracleInstance::from_jobs(&jobs, machines)
                        .unwrap()
                        .brute_force_optimal();
                    let alg =
                        worst_offline_flowtime(&jobs, machines, 20, 9_000 + idx as u64)
                            .unwrap();
                    let slack = jobs.len() as u64;
                    assert!(
                        alg <= 2 * opt + slack,
                        "instance {idx} ({inst:?}, M={machines}): \
                         scheduler {alg} vs optimum {opt} breaks 2*OPT + {slack}",
                    );
                    alg as f64 / opt as f64
                })
                .reduce(|| 0.0, f64::max);
            println!("  {checked} instances checked, worst ALG/OPT = {worst_ratio:.3}");
        },
    );
}

/// Benchmark comparison: on the shipped 500-job heavy-tail benchmark
/// (200 machines, 10 common-random-number replications) the clone-aware
/// ranking policy beats the reactive-backup baseline on both weighted and
/// unweighted average flowtime, by at least 10% on one of them.
#[test]
fn acceptance_07_beats_reactive_baseline() {
    criterion(
        7,
        "clone-aware ranking beats the reactive-backup baseline on the shipped benchmark",
        Duration::from_secs(300),
        || {
            let cfg = SyntheticConfig::desk_scale();
            let jobs = gen_synthetic(&cfg).unwrap();
            assert!(jobs.len() >= 500, "benchmark must ship at least 500 jobs");
            let params = PolicyParams::default();
            assert_eq!(params.epsilon, 0.6);
            assert_eq!(params.risk, 3.0);
            let mut results = Vec::new();
            for kind in [PolicyKind::SrptMsClone, PolicyKind::Mantri] {
                let replications: Vec<_> = (0..10u64)
                    .map(|k| {
                        // Same seed for both policies: identical task
                        // duration draws per copy identity.
                        let seed = 4_242 + k;
                        let mut sched = build(kind, &params, seed).unwrap();
                        let result = run(
                            &jobs,
                            sched.as_mut(),
                            &SimulationConfig::new(200, seed),
                        )
                        .unwrap();
                        summarize(&result, false).unwrap()
                    })
                    .collect();
                results.push(average(&replications).unwrap());
            }
            let (clones, backups) = (results[0], results[1]);
            assert!(
                clones.weighted_avg_flowtime_s < backups.weighted_avg_flowtime_s,
                "weighted: {} not below {}",
                clones.weighted_avg_flowtime_s,
                backups.weighted_avg_flowtime_s
            );
            assert!(
                clones.unweighted_avg_flowtime_s < backups.unweighted_avg_flowtime_s,
                "unweighted: {} not below {}",
                clones.unweighted_avg_flowtime_s,
                backups.unweighted_avg_flowtime_s
            );
            let weighted_gain = 100.0
                * (backups.weighted_avg_flowtime_s - clones.weighted_avg_flowtime_s)
                / backups.weighted_avg_flowtime_s;
            let unweighted_gain = 100.0
                * (backups.unweighted_avg_flowtime_s - clones.unweighted_avg_flowtime_s)
                / backups.unweighted_avg_flowtime_s;
            assert!(
                weighted_gain >= 10.0 || unweighted_gain >= 10.0,
                "improvement too small: weighted {weighted_gain:.2}%, \
                 unweighted {unweighted_gain:.2}%"
            );
            println!(
                "  weighted {:.2} vs {:.2} ({weighted_gain:.2}% better), \
                 unweighted {:.2} vs {:.2} ({unweighted_gain:.2}% better)",
                clones.weighted_avg_flowtime_s,
                backups.weighted_avg_flowtime_s,
                clones.unweighted_avg_flowtime_s,
                backups.unweighted_avg_flowtime_s,
            );
        },
    );
}

/// Engine invariants: audited runs over 100 randomized workloads and all
/// five policies report zero capacity, precedence, or cancellation
/// violations, and every run completes.
#[test]
fn acceptance_08_engine_invariants() {
    criterion(
        8,
        "audited runs report zero capacity/precedence/cancellation violations",
        Duration::from_secs(60),
        || {
            let kinds = [
                PolicyKind::SrptMsClone,
                PolicyKind::Mantri,
                PolicyKind::ScaLite,
                PolicyKind::Fair,
                PolicyKind::OfflineBulkSrpt,
            ];
            for s in 0..100u64 {
                let kind = kinds[(s % 5) as usize];
                let mut cfg = SyntheticConfig::desk_scale();
                cfg.job_count = 10 + (s as usize % 3) * 15;
                cfg.seed = 1_000 + s;
                if kind == PolicyKind::OfflineBulkSrpt || s % 3 == 0 {
                    cfg.arrival = ArrivalProcess::Bulk;
                }
                let jobs = gen_synthetic(&cfg).unwrap();
                let machines = 5 + (s as usize % 4) * 15;
                let mut sched = build(kind, &PolicyParams::default(), s).unwrap();
                let mut config = SimulationConfig::new(machines, s);
                config.audit = true;
                let result = run(&jobs, sched.as_mut(), &config).unwrap();
                assert!(result.complete(), "workload {s} did not finish");
                let audit = result.audit.expect("audit was requested");
                assert!(
                    audit.clean(),
                    "workload {s} ({} on {machines} machines): {audit:?}",
                    kind.name()
                );
            }
        },
    );
}

/// CLI determinism: two `simulate` runs with the same configuration and
/// seed produce byte-identical metric files (`run_meta.json`, which records
/// wall-clock time, is the documented exception).
#[test]
fn acceptance_09_cli_determinism() {
    criterion(
        9,
        "identical simulate configurations produce byte-identical metrics",
        Duration::from_secs(60),
        || {
            let dir = tempfile::tempdir().unwrap();
            let workload = dir.path().join("bench.csv");
            let gen = Command::new(env!("CARGO_BIN_EXE_clonesim"))
                .args([
                    "gen-workload",
                    "--preset",
                    "desk",
                    "--jobs",
                    "80",
                    "--out",
                ])
                .arg(&workload)
                .output()
                .unwrap();
            assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));

            let mut outputs = Vec::new();
            for name in ["first", "second"] {
                let out_dir = dir.path().join(name);
                let run = Command::new(env!("CARGO_BIN_EXE_clonesim"))
                    .arg("simulate")
                    .arg("--workload")
                    .arg(&workload)
                    .args([
                        "--policy",
                        "srptms+c",
                        "--machines",
                        "50",
                        "--seed",
                        "9",
                        "--replications",
                        "3",
                        "--out",
                    ])
                    .arg(&out_dir)
                    .output()
                    .unwrap();
                assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
                let mut files = BTreeMap::new();
                for entry in std::fs::read_dir(&out_dir).unwrap() {
                    let path = entry.unwrap().path();
                    let name = path.file_name().unwrap().to_string_lossy().into_owned();
                    if name != "run_meta.json" {
                        files.insert(name, std::fs::read(&path).unwrap());
                    }
                }
                outputs.push(files);
            }
            assert!(!outputs[0].is_empty(), "simulate produced no metric files");
            assert_eq!(
                outputs[0].keys().collect::<Vec<_>>(),
                outputs[1].keys().collect::<Vec<_>>(),
                "runs wrote different file sets"
            );
            for (name, bytes) in &outputs[0] {
                assert_eq!(
                    bytes, &outputs[1][name],
                    "{name} differs between identical runs"
                );
            }
            println!("  {} metric files byte-identical", outputs[0].len());
        },
    );
}

/// Speed monotonicity: under the static-priority bulk scheduler with common
/// random numbers, raising the cluster speed through 1.0 → 1.5 → 2.0 never
/// increases any job's flowtime, across 3 workloads x 3 cluster sizes.
#[test]
fn acceptance_10_speed_monotonicity() {
    criterion(
        10,
        "faster machines never delay any job under the static-priority scheduler",
        Duration::from_secs(60),
        || {
            for wseed in [31u64, 0, 1] {
                for machines in [20usize, 100, 200] {
                    let mut cfg = SyntheticConfig::desk_scale();
                    cfg.job_count = 100;
                    cfg.seed = wseed;
                    cfg.arrival = ArrivalProcess::Bulk;
                    let jobs = gen_synthetic(&cfg).unwrap();
                    let run_at = |speed: f64| {
                        let mut sched =
                            build(PolicyKind::OfflineBulkSrpt, &PolicyParams::default(), 77)
                                .unwrap();
                        let mut config = SimulationConfig::new(machines, 77);
                        config.speed = speed;
                        run(&jobs, sched.as_mut(), &config).unwrap()
                    };
                    let base = run_at(1.0);
                    let mid = run_at(1.5);
                    let fast = run_at(2.0);
                    for outcome in &base.outcomes {
                        let f1 = outcome.flowtime_s;
                        let f15 = mid.outcome(&outcome.job_id).unwrap().flowtime_s;
                        let f2 = fast.outcome(&outcome.job_id).unwrap().flowtime_s;
                        assert!(
                            f15 <= f1 && f2 <= f15,
                            "job {} slowed down (wseed {wseed}, M {machines}): \
                             {f1} -> {f15} -> {f2}",
                            outcome.job_id
                        );
                    }
                }
            }
        },
    );
}
