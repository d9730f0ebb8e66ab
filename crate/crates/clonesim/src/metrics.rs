//! Flowtime metrics and deterministic exports.
//!
//! Summaries and CDFs are plain data derived from a [`SimulationResult`];
//! exports are byte-deterministic (fixed field order, 6-significant-digit
//! floats, no timestamps) so identical runs produce identical files.

use std::fs;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::engine::SimulationResult;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("run is incomplete ({unfinished} unfinished jobs); pass allow_partial to summarize anyway")]
    Incomplete { unfinished: usize },
    #[error("invalid metric request: {0}")]
    Invalid(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serialize(String),
}

/// Flowtime averages for one run (completed jobs only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryMetrics {
    #[serde(rename = "weighted_avg_s")]
    pub weighted_avg_flowtime_s: f64,
    #[serde(rename = "unweighted_avg_s")]
    pub unweighted_avg_flowtime_s: f64,
    #[serde(rename = "jobs")]
    pub job_count: usize,
    #[serde(rename = "clones")]
    pub total_clone_copies: u64,
    #[serde(rename = "slots")]
    pub slots_executed: u64,
}

/// Weighted and unweighted mean flowtime over completed jobs. Truncated runs
/// are refused unless `allow_partial`, in which case the averages cover the
/// jobs that did finish.
pub fn summarize(
    result: &SimulationResult,
    allow_partial: bool,
) -> Result<SummaryMetrics, MetricsError> {
    if !result.complete() && !allow_partial {
        return Err(MetricsError::Incomplete {
            unfinished: result.unfinished.len(),
        });
    }
    if result.outcomes.is_empty() {
        return Err(MetricsError::Invalid("no completed jobs to summarize".into()));
    }
    let mut weight_sum = 0.0;
    let mut weighted = 0.0;
    let mut unweighted = 0.0;
    for o in &result.outcomes {
        let f = o.flowtime_s as f64;
        weight_sum += o.weight;
        weighted += o.weight * f;
        unweighted += f;
    }
    Ok(SummaryMetrics {
        weighted_avg_flowtime_s: weighted / weight_sum,
        unweighted_avg_flowtime_s: unweighted / result.outcomes.len() as f64,
        job_count: result.outcomes.len(),
        total_clone_copies: result.clone_copies,
        slots_executed: result.slots_executed,
    })
}

/// Mean of per-replication summaries (float fields averaged, counters
/// rounded to nearest). All replications must cover the same job count.
pub fn average(runs: &[SummaryMetrics]) -> Result<SummaryMetrics, MetricsError> {
    let first = runs
        .first()
        .ok_or_else(|| MetricsError::Invalid("cannot average zero runs".into()))?;
    if runs.iter().any(|r| r.job_count != first.job_count) {
        return Err(MetricsError::Invalid(
            "replications disagree on job count; refusing to average".into(),
        ));
    }
    let n = runs.len() as f64;
    Ok(SummaryMetrics {
        weighted_avg_flowtime_s: runs.iter().map(|r| r.weighted_avg_flowtime_s).sum::<f64>() / n,
        unweighted_avg_flowtime_s: runs
            .iter()
            .map(|r| r.unweighted_avg_flowtime_s)
            .sum::<f64>()
            / n,
        job_count: first.job_count,
        total_clone_copies: (runs.iter().map(|r| r.total_clone_copies).sum::<u64>() as f64 / n)
            .round() as u64,
        slots_executed: (runs.iter().map(|r| r.slots_executed).sum::<u64>() as f64 / n).round()
            as u64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CdfPoint {
    pub flowtime_s: f64,
    pub fraction: f64,
}

/// Empirical flowtime CDF on a fixed grid. The denominator is *all* jobs in
/// the run, so a truncated run's CDF saturates below 1 — unfinished jobs
/// show up as missing mass instead of being silently dropped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfSeries {
    pub total_jobs: usize,
    pub points: Vec<CdfPoint>,
}

/// Evaluate the flowtime CDF at `lo + step, lo + 2*step, ..., hi`.
pub fn flowtime_cdf(
    result: &SimulationResult,
    lo_s: f64,
    hi_s: f64,
    step_s: f64,
) -> Result<CdfSeries, MetricsError> {
    if !(step_s > 0.0 && step_s.is_finite() && lo_s.is_finite() && hi_s > lo_s) {
        return Err(MetricsError::Invalid(format!(
            "need finite lo < hi and step > 0 (got lo={lo_s}, hi={hi_s}, step={step_s})"
        )));
    }
    if result.total_jobs == 0 {
        return Err(MetricsError::Invalid("run contains no jobs".into()));
    }
    let count = ((hi_s - lo_s) / step_s + 1e-9).floor() as usize;
    let mut flows: Vec<f64> = result.outcomes.iter().map(|o| o.flowtime_s as f64).collect();
    flows.sort_by(f64::total_cmp);
    let total = result.total_jobs as f64;
    let points = (1..=count)
        .map(|k| {
            let t = lo_s + k as f64 * step_s;
            let below = flows.partition_point(|&f| f <= t);
            CdfPoint {
                flowtime_s: t,
                fraction: below as f64 / total,
            }
        })
        .collect();
    Ok(CdfSeries {
        total_jobs: result.total_jobs,
        points,
    })
}

/// Format with 6 significant digits, trailing zeros trimmed — the float
/// convention for every CSV export.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if mag > 5 {
        let scale = 10f64.powi(mag - 5);
        return format!("{:.0}", (x / scale).round() * scale);
    }
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

/// Anything that can be written as a deterministic CSV or JSON document.
pub trait Exportable {
    fn csv_text(&self) -> String;
    fn json_text(&self) -> String;

    fn text(&self, format: ExportFormat) -> String {
        match format {
            ExportFormat::Csv => self.csv_text(),
            ExportFormat::Json => self.json_text(),
        }
    }
}

impl Exportable for SummaryMetrics {
    fn csv_text(&self) -> String {
        format!(
            "weighted_avg_s,unweighted_avg_s,jobs,clones\n{},{},{},{}\n",
            fmt_sig(self.weighted_avg_flowtime_s),
            fmt_sig(self.unweighted_avg_flowtime_s),
            self.job_count,
            self.total_clone_copies,
        )
    }

    fn json_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

impl Exportable for CdfSeries {
    fn csv_text(&self) -> String {
        let mut out = String::from("flowtime_s,fraction\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", fmt_sig(p.flowtime_s), fmt_sig(p.fraction)));
        }
        out
    }

    fn json_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("cdf serializes")
    }
}

pub fn export<T: Exportable + ?Sized>(
    item: &T,
    format: ExportFormat,
    path: &Path,
) -> Result<(), MetricsError> {
    fs::write(path, item.text(format))?;
    Ok(())
}
