//! Command-line front end.
//!
//! Five subcommands: `simulate` (one policy, N replications), `sweep` (vary
//! one knob), `compare` (several policies on identical task durations),
//! `verify-bounds` (statistical check of the per-job flowtime guarantee),
//! and `gen-workload` (synthetic trace generation). Settings come from
//! flags, optionally backed by a TOML file (`--config`); flags win.
//!
//! Exit codes: 0 success, 1 runtime failure (including a failed bound
//! verification), 2 bad usage or configuration. All metric files are
//! byte-deterministic for a fixed configuration and seed; the only
//! timestamp lives in the `run_meta.json` sidecar.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{JobSpec, RiskFactor};
use crate::engine::{run, SimulationConfig, SimulationResult};
use crate::metrics::{
    average, export, flowtime_cdf, fmt_sig, summarize, ExportFormat, SummaryMetrics,
};
use crate::policies::{build, PolicyKind, PolicyParams};
use crate::verify::check_flowtime_bounds;
use crate::workload::{gen_synthetic, load_workload, save_workload, ArrivalProcess, SyntheticConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "clonesim",
    version,
    about = "Slot-level simulator for task-cloning MapReduce schedulers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one policy over a workload and export flowtime metrics.
    Simulate(SimulateArgs),
    /// Rerun an experiment while varying one knob.
    Sweep(SweepArgs),
    /// Run several policies against identical task durations.
    Compare(CompareArgs),
    /// Statistically verify per-job flowtime bounds on a bulk workload.
    VerifyBounds(VerifyBoundsArgs),
    /// Generate a synthetic workload CSV.
    GenWorkload(GenWorkloadArgs),
}

/// Flags shared by the experiment subcommands. Each is optional here;
/// unset values fall back to the `--config` file, then to defaults
/// (policy srptms+c, epsilon 0.6, risk 3, 200 machines, speed 1, seed 42,
/// 1 replication, output under ./results).
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Workload CSV (schema documented by `gen-workload`).
    #[arg(long)]
    pub workload: Option<PathBuf>,
    /// TOML file carrying the same keys as these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// One of: srptms+c, offline-srpt, mantri, sca-lite, fair.
    #[arg(long)]
    pub policy: Option<String>,
    /// Share-skew knob in (0, 1].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Risk multiplier on duration standard deviations.
    #[arg(long)]
    pub risk: Option<f64>,
    #[arg(long)]
    pub machines: Option<usize>,
    /// Seconds of work each machine completes per slot (>= 1).
    #[arg(long)]
    pub speed: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent replications, seeded seed, seed+1, ...
    #[arg(long)]
    pub replications: Option<u32>,
    /// Output directory for metric files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Epsilon,
    Risk,
    Machines,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::Epsilon => "epsilon",
            SweepParam::Risk => "risk",
            SweepParam::Machines => "machines",
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Knob to vary; every other setting is held fixed.
    #[arg(long, value_enum)]
    pub param: SweepParam,
    /// Comma-separated values for the swept knob.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated policies (default: srptms+c,mantri,sca-lite,fair).
    #[arg(long, value_delimiter = ',')]
    pub policies: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct VerifyBoundsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// ~500 jobs with Poisson arrivals, desk-scale durations.
    Desk,
    /// Trace-calibrated scale: 6064 jobs over a ~9.7-hour window.
    Full,
    /// Desk-scale jobs all arriving at slot 0.
    Bulk,
}

#[derive(Debug, Args)]
pub struct GenWorkloadArgs {
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    pub preset: Preset,
    /// Override the preset's job count.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Override the preset's generator seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Destination CSV file.
    #[arg(long)]
    pub out: PathBuf,
}

/// `--config` file contents; every key mirrors a flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    workload: Option<PathBuf>,
    policy: Option<String>,
    epsilon: Option<f64>,
    risk: Option<f64>,
    machines: Option<usize>,
    speed: Option<f64>,
    seed: Option<u64>,
    replications: Option<u32>,
    out: Option<PathBuf>,
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub workload: PathBuf,
    pub policy: PolicyKind,
    pub params: PolicyParams,
    pub machines: usize,
    pub speed: f64,
    pub seed: u64,
    pub replications: u32,
    pub out: PathBuf,
}

fn resolve(common: &CommonArgs, default_replications: u32) -> Result<Experiment, CliError> {
    let file: FileConfig = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            toml::from_str(&text)
                .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    let workload = common
        .workload
        .clone()
        .or(file.workload)
        .ok_or_else(|| CliError::Usage("a workload CSV is required (--workload or config file)".into()))?;
    let policy = common
        .policy
        .clone()
        .or(file.policy)
        .unwrap_or_else(|| "srptms+c".into())
        .parse::<PolicyKind>()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut params = PolicyParams::default();
    if let Some(e) = common.epsilon.or(file.epsilon) {
        params.epsilon = e;
    }
    if let Some(r) = common.risk.or(file.risk) {
        params.risk = r;
    }
    params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let machines = common.machines.or(file.machines).unwrap_or(200);
    if machines == 0 {
        return Err(CliError::Usage("machines must be >= 1".into()));
    }
    let speed = common.speed.or(file.speed).unwrap_or(1.0);
    if !(speed >= 1.0 && speed.is_finite()) {
        return Err(CliError::Usage(format!(
            "speed must be finite and >= 1 (got {speed})"
        )));
    }
    let replications = common
        .replications
        .or(file.replications)
        .unwrap_or(default_replications);
    if replications == 0 {
        return Err(CliError::Usage("replications must be >= 1".into()));
    }
    Ok(Experiment {
        workload,
        policy,
        params,
        machines,
        speed,
        seed: common.seed.or(file.seed).unwrap_or(42),
        replications,
        out: common.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("results")),
    })
}

fn load_jobs(exp: &Experiment) -> Result<Vec<JobSpec>, CliError> {
    load_workload(&exp.workload).map_err(|e| {
        CliError::Usage(format!("workload {}: {e}", exp.workload.display()))
    })
}

fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))
}

fn run_once(
    jobs: &[JobSpec],
    exp: &Experiment,
    kind: PolicyKind,
    seed: u64,
) -> Result<SimulationResult, CliError> {
    let mut sched =
        build(kind, &exp.params, seed).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut config = SimulationConfig::new(exp.machines, seed);
    config.speed = exp.speed;
    run(jobs, sched.as_mut(), &config).map_err(|e| CliError::Runtime(e.to_string()))
}

/// Run `exp.replications` independent replications of `kind`, in parallel,
/// results ordered by replication index.
fn replicated(
    jobs: &[JobSpec],
    exp: &Experiment,
    kind: PolicyKind,
) -> Result<(Vec<SummaryMetrics>, Vec<SimulationResult>), CliError> {
    let pairs: Vec<(SummaryMetrics, SimulationResult)> = (0..exp.replications)
        .into_par_iter()
        .map(|k| -> Result<_, CliError> {
            let result = run_once(jobs, exp, kind, exp.seed.wrapping_add(k as u64))?;
            let summary =
                summarize(&result, false).map_err(|e| CliError::Runtime(e.to_string()))?;
            Ok((summary, result))
        })
        .collect::<Result<_, _>>()?;
    Ok(pairs.into_iter().unzip())
}

/// Merge the completed jobs of several replications into one result so the
/// CDF covers the pooled flowtime sample.
fn pool(results: &[SimulationResult]) -> SimulationResult {
    SimulationResult {
        outcomes: results.iter().flat_map(|r| r.outcomes.iter().cloned()).collect(),
        utilization: Vec::new(),
        clone_copies: results.iter().map(|r| r.clone_copies).sum(),
        slots_executed: results.iter().map(|r| r.slots_executed).max().unwrap_or(0),
        total_jobs: results.iter().map(|r| r.total_jobs).sum(),
        unfinished: Vec::new(),
        audit: None,
    }
}

/// Integer-stepped grid with at most 100 points covering every observed
/// flowtime, so the exported CDF is identical across reruns.
fn cdf_grid(pooled: &SimulationResult) -> (f64, f64) {
    let max_flow = pooled
        .outcomes
        .iter()
        .map(|o| o.flowtime_s)
        .max()
        .unwrap_or(1)
        .max(1);
    let step = max_flow.div_ceil(100).max(1);
    let count = max_flow.div_ceil(step);
    ((step * count) as f64, step as f64)
}

#[derive(Serialize)]
struct RunMeta<'a> {
    command: &'a str,
    created_unix_s: u64,
    workload: String,
    policy: &'a str,
    epsilon: f64,
    risk: f64,
    machines: usize,
    speed: f64,
    seed: u64,
    replications: u32,
}

/// The one intentionally non-deterministic artifact: records when and with
/// what settings the files around it were produced.
fn write_meta(exp: &Experiment, command: &str) -> Result<(), CliError> {
    let meta = RunMeta {
        command,
        created_unix_s: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        workload: exp.workload.display().to_string(),
        policy: exp.policy.name(),
        epsilon: exp.params.epsilon,
        risk: exp.params.risk,
        machines: exp.machines,
        speed: exp.speed,
        seed: exp.seed,
        replications: exp.replications,
    };
    let text = serde_json::to_string_pretty(&meta)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(exp.out.join("run_meta.json"), text)
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn write_export<T: crate::metrics::Exportable>(
    item: &T,
    format: ExportFormat,
    path: &Path,
) -> Result<(), CliError> {
    export(item, format, path)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn summary_row(out: &mut String, label: &str, s: &SummaryMetrics) {
    out.push_str(&format!(
        "{label},{},{},{},{}\n",
        fmt_sig(s.weighted_avg_flowtime_s),
        fmt_sig(s.unweighted_avg_flowtime_s),
        s.job_count,
        s.total_clone_copies,
    ));
}

fn cmd_simulate(args: &SimulateArgs) -> Result<i32, CliError> {
    let exp = resolve(&args.common, 1)?;
    let jobs = load_jobs(&exp)?;
    ensure_out_dir(&exp.out)?;
    let (summaries, results) = replicated(&jobs, &exp, exp.policy)?;
    for (k, s) in summaries.iter().enumerate() {
        write_export(s, ExportFormat::Csv, &exp.out.join(format!("replication_{k:03}.csv")))?;
    }
    let avg = average(&summaries).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_export(&avg, ExportFormat::Csv, &exp.out.join("summary_avg.csv"))?;
    let pooled = pool(&results);
    let (hi, step) = cdf_grid(&pooled);
    let cdf = flowtime_cdf(&pooled, 0.0, hi, step)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    write_export(&cdf, ExportFormat::Csv, &exp.out.join("cdf.csv"))?;
    write_meta(&exp, "simulate")?;
    println!(
        "policy={} jobs={} replications={} weighted_avg_s={} unweighted_avg_s={} clones={}",
        exp.policy.name(),
        avg.job_count,
        exp.replications,
        fmt_sig(avg.weighted_avg_flowtime_s),
        fmt_sig(avg.unweighted_avg_flowtime_s),
        avg.total_clone_copies,
    );
    println!("metrics written to {}", exp.out.display());
    Ok(EXIT_OK)
}

fn cmd_sweep(args: &SweepArgs) -> Result<i32, CliError> {
    let base = resolve(&args.common, 1)?;
    let jobs = load_jobs(&base)?;
    ensure_out_dir(&base.out)?;
    let param = args.param.name();
    let mut combined = format!("{param},weighted_avg_s,unweighted_avg_s,jobs,clones\n");
    for raw in &args.values {
        let mut exp = base.clone();
        let label = match args.param {
            SweepParam::Epsilon => {
                exp.params.epsilon = parse_value(raw, param)?;
                fmt_sig(exp.params.epsilon)
            }
            SweepParam::Risk => {
                exp.params.risk = parse_value(raw, param)?;
                fmt_sig(exp.params.risk)
            }
            SweepParam::Machines => {
                let m: usize = raw
                    .trim()
                    .parse()
                    .map_err(|e| CliError::Usage(format!("bad machines value '{raw}': {e}")))?;
                if m == 0 {
                    return Err(CliError::Usage("machines must be >= 1".into()));
                }
                exp.machines = m;
                m.to_string()
            }
        };
        exp.params
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let (summaries, _) = replicated(&jobs, &exp, exp.policy)?;
        let avg = average(&summaries).map_err(|e| CliError::Runtime(e.to_string()))?;
        write_export(
            &avg,
            ExportFormat::Csv,
            &base.out.join(format!("sweep_{param}={label}.csv")),
        )?;
        summary_row(&mut combined, &label, &avg);
        println!(
            "{param}={label} weighted_avg_s={} unweighted_avg_s={} clones={}",
            fmt_sig(avg.weighted_avg_flowtime_s),
            fmt_sig(avg.unweighted_avg_flowtime_s),
            avg.total_clone_copies,
        );
    }
    let combined_path = base.out.join(format!("sweep_{param}.csv"));
    fs::write(&combined_path, combined)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", combined_path.display())))?;
    write_meta(&base, "sweep")?;
    println!("metrics written to {}", base.out.display());
    Ok(EXIT_OK)
}

fn parse_value(raw: &str, param: &str) -> Result<f64, CliError> {
    raw.trim()
        .parse::<f64>()
        .map_err(|e| CliError::Usage(format!("bad {param} value '{raw}': {e}")))
}

fn cmd_compare(args: &CompareArgs) -> Result<i32, CliError> {
    let base = resolve(&args.common, 1)?;
    let names = args.policies.clone().unwrap_or_else(|| {
        ["srptms+c", "mantri", "sca-lite", "fair"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    });
    let kinds: Vec<PolicyKind> = names
        .iter()
        .map(|n| n.parse().map_err(|e: crate::policies::PolicyError| CliError::Usage(e.to_string())))
        .collect::<Result<_, _>>()?;
    let jobs = load_jobs(&base)?;
    ensure_out_dir(&base.out)?;
    let mut combined = String::from("policy,weighted_avg_s,unweighted_avg_s,jobs,clones\n");
    for kind in kinds {
        // Same master seed for every policy: identical task-duration draws,
        // so differences are attributable to scheduling alone.
        let (summaries, _) = replicated(&jobs, &base, kind)?;
        let avg = average(&summaries).map_err(|e| CliError::Runtime(e.to_string()))?;
        write_export(
            &avg,
            ExportFormat::Csv,
            &base.out.join(format!("compare_{}.csv", kind.name())),
        )?;
        summary_row(&mut combined, kind.name(), &avg);
        println!(
            "{:<13} weighted_avg_s={} unweighted_avg_s={} clones={}",
            kind.name(),
            fmt_sig(avg.weighted_avg_flowtime_s),
            fmt_sig(avg.unweighted_avg_flowtime_s),
            avg.total_clone_copies,
        );
    }
    let combined_path = base.out.join("compare_policies.csv");
    fs::write(&combined_path, combined)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", combined_path.display())))?;
    write_meta(&base, "compare")?;
    println!("metrics written to {}", base.out.display());
    Ok(EXIT_OK)
}

fn cmd_verify_bounds(args: &VerifyBoundsArgs) -> Result<i32, CliError> {
    let exp = resolve(&args.common, 200)?;
    let jobs = load_jobs(&exp)?;
    if let Some(j) = jobs.iter().find(|j| j.arrival_slot != 0) {
        return Err(CliError::Usage(format!(
            "job {} arrives at slot {}; bounds are verified on bulk workloads \
             (generate one with gen-workload --preset bulk)",
            j.job_id, j.arrival_slot
        )));
    }
    let risk = RiskFactor::new(exp.params.risk).map_err(|e| CliError::Usage(e.to_string()))?;
    if risk.value() <= 1.0 {
        return Err(CliError::Usage(format!(
            "--risk {} gives a vacuous guarantee; use a value above 1",
            risk.value()
        )));
    }
    if exp.replications < 100 {
        return Err(CliError::Usage(format!(
            "--replications {} is too few to estimate satisfaction rates; use at least 100",
            exp.replications
        )));
    }
    let report = check_flowtime_bounds(&jobs, exp.machines, risk, exp.replications, exp.seed)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    ensure_out_dir(&exp.out)?;
    write_export(&report, ExportFormat::Json, &exp.out.join("bound_report.json"))?;
    write_export(&report, ExportFormat::Csv, &exp.out.join("bound_report.csv"))?;
    write_meta(&exp, "verify-bounds")?;
    for j in &report.jobs {
        println!(
            "job {}: bound_s={} rate={}/{} upper={} floor={} {}",
            j.job_id,
            fmt_sig(j.bound_s),
            j.successes,
            j.replications,
            fmt_sig(j.wilson_upper_95),
            fmt_sig(j.claimed_min_probability),
            if j.pass { "PASS" } else { "FAIL" },
        );
    }
    println!(
        "overall: {} ({} jobs, {} replications, report in {})",
        if report.overall_pass { "PASS" } else { "FAIL" },
        report.jobs.len(),
        report.replications,
        exp.out.display(),
    );
    Ok(if report.overall_pass { EXIT_OK } else { EXIT_RUNTIME })
}

fn cmd_gen_workload(args: &GenWorkloadArgs) -> Result<i32, CliError> {
    let mut cfg = match args.preset {
        Preset::Desk => SyntheticConfig::desk_scale(),
        Preset::Full => SyntheticConfig::full_scale(),
        Preset::Bulk => SyntheticConfig {
            arrival: ArrivalProcess::Bulk,
            ..SyntheticConfig::desk_scale()
        },
    };
    if let Some(n) = args.jobs {
        cfg.job_count = n;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let jobs = gen_synthetic(&cfg).map_err(|e| CliError::Runtime(e.to_string()))?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    save_workload(&args.out, &jobs)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", args.out.display())))?;
    println!("wrote {} jobs to {}", jobs.len(), args.out.display());
    Ok(EXIT_OK)
}

pub fn execute(cli: Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Compare(a) => cmd_compare(a),
        Command::VerifyBounds(a) => cmd_verify_bounds(a),
        Command::GenWorkload(a) => cmd_gen_workload(a),
    }
}
