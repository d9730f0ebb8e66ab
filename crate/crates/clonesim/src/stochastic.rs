//! Task-duration distributions, cloning speedup curves, and the named
//! substream RNG discipline.
//!
//! Every random draw in a simulation comes from a counter-style substream
//! keyed by (master seed, domain, identity words). Two runs with the same
//! seed replay the same draws, and the draw for one identity never shifts
//! when unrelated draws are added or removed — the property that makes
//! common-random-number comparisons across schedulers meaningful.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution as _;
use thiserror::Error;

/// Samples drawn for Monte Carlo `expected_min_of` estimates.
const MIN_ESTIMATE_SAMPLES: u64 = 100_000;

#[derive(Debug, Error)]
pub enum StochasticError {
    #[error("invalid distribution parameter: {0}")]
    InvalidParameter(String),
    #[error("expectation undefined: {0}")]
    UndefinedExpectation(String),
    #[error("empirical speedup table is empty")]
    EmptyTable,
}

/// First two moments of a task-duration distribution, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMoments {
    pub mean_s: f64,
    pub sd_s: f64,
}

impl PhaseMoments {
    pub fn new(mean_s: f64, sd_s: f64) -> Self {
        PhaseMoments { mean_s, sd_s }
    }
}

/// Distribution of a single task copy's workload, in seconds of machine time.
#[derive(Debug, Clone, PartialEq)]
pub enum DurationDistribution {
    /// Heavy-tailed: `P(T > t) = (mu/t)^alpha` for `t >= mu`.
    Pareto { alpha: f64, mu: f64 },
    /// Every copy takes exactly `value` seconds.
    Deterministic { value: f64 },
    /// `ln T ~ Normal(log_mean, log_sd)`.
    LogNormal { log_mean: f64, log_sd: f64 },
}

impl DurationDistribution {
    /// Heavy-tailed distribution matching the given first two moments.
    /// The implied tail index is `1 + sqrt(1 + mean^2/sd^2)`, which is above 2
    /// (finite variance) for any finite positive `sd`; non-finite inputs are
    /// rejected.
    pub fn pareto_from_moments(mean_s: f64, sd_s: f64) -> Result<Self, StochasticError> {
        if !(mean_s > 0.0 && mean_s.is_finite() && sd_s > 0.0 && sd_s.is_finite()) {
            return Err(StochasticError::InvalidParameter(format!(
                "pareto moments must be finite and positive (mean={mean_s}, sd={sd_s})"
            )));
        }
        let alpha = 1.0 + (1.0 + (mean_s / sd_s).powi(2)).sqrt();
        if alpha <= 2.0 {
            return Err(StochasticError::InvalidParameter(format!(
                "implied tail index {alpha} <= 2 has infinite variance"
            )));
        }
        let mu = mean_s * (alpha - 1.0) / alpha;
        Ok(DurationDistribution::Pareto { alpha, mu })
    }

    /// Log-normal distribution matching the given first two moments.
    pub fn log_normal_from_moments(mean_s: f64, sd_s: f64) -> Result<Self, StochasticError> {
        if !(mean_s > 0.0 && mean_s.is_finite() && sd_s > 0.0 && sd_s.is_finite()) {
            return Err(StochasticError::InvalidParameter(format!(
                "log-normal moments must be finite and positive (mean={mean_s}, sd={sd_s})"
            )));
        }
        let log_var = (1.0 + (sd_s / mean_s).powi(2)).ln();
        Ok(DurationDistribution::LogNormal {
            log_mean: mean_s.ln() - log_var / 2.0,
            log_sd: log_var.sqrt(),
        })
    }

    /// Parameter sanity; `Pareto` with `alpha` in (1, 2] is valid here (its
    /// mean exists) even though job validation rejects its infinite variance.
    pub fn validate(&self) -> Result<(), StochasticError> {
        match *self {
            DurationDistribution::Pareto { alpha, mu } => {
                if !(alpha > 1.0 && alpha.is_finite() && mu > 0.0 && mu.is_finite()) {
                    return Err(StochasticError::InvalidParameter(format!(
                        "pareto requires alpha > 1 and mu > 0 (alpha={alpha}, mu={mu})"
                    )));
                }
            }
            DurationDistribution::Deterministic { value } => {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(StochasticError::InvalidParameter(format!(
                        "deterministic duration must be positive and finite (value={value})"
                    )));
                }
            }
            DurationDistribution::LogNormal { log_mean, log_sd } => {
                if !(log_mean.is_finite() && log_sd >= 0.0 && log_sd.is_finite()) {
                    return Err(StochasticError::InvalidParameter(format!(
                        "log-normal requires finite log_mean and log_sd >= 0 \
                         (log_mean={log_mean}, log_sd={log_sd})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn mean_s(&self) -> f64 {
        match *self {
            DurationDistribution::Pareto { alpha, mu } => {
                if alpha > 1.0 {
                    alpha * mu / (alpha - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            DurationDistribution::Deterministic { value } => value,
            DurationDistribution::LogNormal { log_mean, log_sd } => {
                (log_mean + log_sd * log_sd / 2.0).exp()
            }
        }
    }

    /// Standard deviation; infinite for `Pareto` with `alpha <= 2`.
    pub fn sd_s(&self) -> f64 {
        match *self {
            DurationDistribution::Pareto { alpha, mu } => {
                if alpha > 2.0 {
                    mu * alpha.sqrt() / ((alpha - 1.0) * (alpha - 2.0).sqrt())
                } else {
                    f64::INFINITY
                }
            }
            DurationDistribution::Deterministic { .. } => 0.0,
            DurationDistribution::LogNormal { log_mean, log_sd } => {
                let mean = (log_mean + log_sd * log_sd / 2.0).exp();
                mean * ((log_sd * log_sd).exp() - 1.0).sqrt()
            }
        }
    }

    pub fn moments(&self) -> PhaseMoments {
        PhaseMoments::new(self.mean_s(), self.sd_s())
    }

    /// Survival function `P(T > t)`.
    pub fn survival(&self, t: f64) -> f64 {
        match *self {
            DurationDistribution::Pareto { alpha, mu } => {
                if t <= mu {
                    1.0
                } else {
                    (mu / t).powf(alpha)
                }
            }
            DurationDistribution::Deterministic { value } => {
                if t < value {
                    1.0
                } else {
                    0.0
                }
            }
            DurationDistribution::LogNormal { log_mean, log_sd } => {
                if t <= 0.0 {
                    1.0
                } else if log_sd == 0.0 {
                    if t < log_mean.exp() {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    let z = (t.ln() - log_mean) / log_sd;
                    1.0 - standard_normal_cdf(z)
                }
            }
        }
    }

    /// One workload draw. Pareto uses inverse-CDF `mu * U^(-1/alpha)` with
    /// `U` uniform on (0, 1].
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DurationDistribution::Pareto { alpha, mu } => {
                let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
                mu * u.powf(-1.0 / alpha)
            }
            DurationDistribution::Deterministic { value } => value,
            DurationDistribution::LogNormal { log_mean, log_sd } => {
                // Parameters were validated at construction; new() only fails
                // on non-finite or negative sigma.
                rand_distr::LogNormal::new(log_mean, log_sd)
                    .expect("validated log-normal parameters")
                    .sample(rng)
            }
        }
    }
}

fn standard_normal_cdf(z: f64) -> f64 {
    use statrs::distribution::ContinuousCDF;
    statrs::distribution::Normal::standard().cdf(z)
}

/// Expected minimum of `k` i.i.d. draws, with provenance of the estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedMin {
    pub value_s: f64,
    /// `None` for closed-form results; Monte Carlo results report the
    /// standard error of the mean.
    pub standard_error_s: Option<f64>,
    pub sample_count: Option<u64>,
}

impl ExpectedMin {
    fn exact(value_s: f64) -> Self {
        ExpectedMin {
            value_s,
            standard_error_s: None,
            sample_count: None,
        }
    }
}

/// `E[min of k draws]`. Closed form for `Deterministic` (the value itself)
/// and `Pareto` (`alpha*k*mu / (alpha*k - 1)`, since the minimum of `k`
/// Pareto draws is Pareto with tail index `alpha*k`); Monte Carlo otherwise.
/// The RNG is only consumed on the Monte Carlo path.
pub fn expected_min_of<R: Rng + ?Sized>(
    dist: &DurationDistribution,
    k: u32,
    rng: &mut R,
) -> Result<ExpectedMin, StochasticError> {
    if k < 1 {
        return Err(StochasticError::InvalidParameter(format!(
            "copy count must be >= 1 (got {k})"
        )));
    }
    dist.validate()?;
    match *dist {
        DurationDistribution::Deterministic { value } => Ok(ExpectedMin::exact(value)),
        DurationDistribution::Pareto { alpha, mu } => {
            let ka = alpha * k as f64;
            if ka <= 1.0 {
                return Err(StochasticError::UndefinedExpectation(format!(
                    "min of {k} Pareto draws has tail index {ka} <= 1"
                )));
            }
            Ok(ExpectedMin::exact(ka * mu / (ka - 1.0)))
        }
        DurationDistribution::LogNormal { .. } => {
            let n = MIN_ESTIMATE_SAMPLES;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..n {
                let mut m = f64::INFINITY;
                for _ in 0..k {
                    m = m.min(dist.sample(rng));
                }
                sum += m;
                sum_sq += m * m;
            }
            let mean = sum / n as f64;
            let var = (sum_sq / n as f64 - mean * mean).max(0.0);
            Ok(ExpectedMin {
                value_s: mean,
                standard_error_s: Some((var / n as f64).sqrt()),
                sample_count: Some(n),
            })
        }
    }
}

/// Multiplicative processing-rate gain from running `k` copies of a task.
///
/// `factor(k)` is the ratio `E[single draw] / E[min of k draws]`: cloning a
/// task is modelled as dividing its expected workload by `factor(k)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SpeedupFunction {
    /// Closed form for Pareto durations: `s(k) = (k*alpha - 1) / (k*(alpha - 1))`.
    Pareto { alpha: f64 },
    /// Measured table, `table[k-1]` is the factor for `k` copies; constant
    /// extension beyond the last entry.
    Empirical(Vec<f64>),
    /// Cloning never helps (deterministic durations).
    Unit,
}

impl SpeedupFunction {
    pub fn factor(&self, k: u32) -> Result<f64, StochasticError> {
        if k < 1 {
            return Err(StochasticError::InvalidParameter(format!(
                "copy count must be >= 1 (got {k})"
            )));
        }
        match self {
            SpeedupFunction::Pareto { alpha } => {
                if !(*alpha > 1.0 && alpha.is_finite()) {
                    return Err(StochasticError::InvalidParameter(format!(
                        "pareto speedup requires alpha > 1 (got {alpha})"
                    )));
                }
                let kf = k as f64;
                Ok((kf * alpha - 1.0) / (kf * (alpha - 1.0)))
            }
            SpeedupFunction::Empirical(table) => {
                if table.is_empty() {
                    return Err(StochasticError::EmptyTable);
                }
                let idx = (k as usize - 1).min(table.len() - 1);
                Ok(table[idx])
            }
            SpeedupFunction::Unit => Ok(1.0),
        }
    }
}

/// Per-property outcome of checking a speedup curve over `k = 1..=k_max`.
/// Violations are reported, not thrown, so measured tables can be inspected.
#[derive(Debug, Clone)]
pub struct SpeedupValidation {
    pub unit_at_one: bool,
    pub monotone_nondecreasing: bool,
    pub bounded_by_copy_count: bool,
    pub discrete_concave: bool,
    /// `s(k)/k` non-increasing — marginal per-copy gain never grows.
    pub ratio_nonincreasing: bool,
    pub failures: Vec<String>,
}

impl SpeedupValidation {
    pub fn all_pass(&self) -> bool {
        self.unit_at_one
            && self.monotone_nondecreasing
            && self.bounded_by_copy_count
            && self.discrete_concave
            && self.ratio_nonincreasing
    }
}

pub fn validate_speedup(
    f: &SpeedupFunction,
    k_max: u32,
) -> Result<SpeedupValidation, StochasticError> {
    if k_max < 1 {
        return Err(StochasticError::InvalidParameter(format!(
            "k_max must be >= 1 (got {k_max})"
        )));
    }
    const TOL: f64 = 1e-12;
    let values: Vec<f64> = (1..=k_max)
        .map(|k| f.factor(k))
        .collect::<Result<_, _>>()?;
    let mut v = SpeedupValidation {
        unit_at_one: true,
        monotone_nondecreasing: true,
        bounded_by_copy_count: true,
        discrete_concave: true,
        ratio_nonincreasing: true,
        failures: Vec::new(),
    };
    if (values[0] - 1.0).abs() > TOL {
        v.unit_at_one = false;
        v.failures.push(format!("s(1) = {} != 1", values[0]));
    }
    for (i, &s) in values.iter().enumerate() {
        let k = (i + 1) as f64;
        if s > k + TOL {
            v.bounded_by_copy_count = false;
            v.failures.push(format!("s({k}) = {s} exceeds {k}"));
        }
        if i > 0 {
            let prev = values[i - 1];
            if s < prev - TOL {
                v.monotone_nondecreasing = false;
                v.failures.push(format!("s({k}) = {s} < s({}) = {prev}", k - 1.0));
            }
            if s / k > prev / (k - 1.0) + TOL {
                v.ratio_nonincreasing = false;
                v.failures
                    .push(format!("s({k})/{k} = {} grows past s({})/{}", s / k, k - 1.0, k - 1.0));
            }
        }
        if i > 1 {
            let d_prev = values[i - 1] - values[i - 2];
            let d_cur = s - values[i - 1];
            if d_cur > d_prev + TOL {
                v.discrete_concave = false;
                v.failures.push(format!(
                    "increment s({k}) - s({}) = {d_cur} exceeds previous increment {d_prev}",
                    k - 1.0
                ));
            }
        }
    }
    Ok(v)
}

/// Purpose tag for a substream; part of the stream key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDomain {
    /// Workload draw for one task copy; keyed by (job, task, copy ordinal) so
    /// the draw is identical across schedulers and speeds.
    CopyWorkload,
    /// A scheduler's own tie-break / selection randomness.
    PolicyDecision,
    /// Synthetic workload generation, keyed by job index.
    SyntheticJob,
    /// Monte Carlo probability/expectation estimators inside policies.
    Estimator,
}

impl StreamDomain {
    fn tag(self) -> u8 {
        match self {
            StreamDomain::CopyWorkload => 1,
            StreamDomain::PolicyDecision => 2,
            StreamDomain::SyntheticJob => 3,
            StreamDomain::Estimator => 4,
        }
    }
}

/// Independent, reproducible RNG for one named identity. The 32-byte ChaCha
/// seed is the literal (master seed, domain, id words) layout, so distinct
/// identities can never collide. `ids[2]` must fit in 56 bits (copy ordinals
/// and slot numbers do).
pub fn substream(master_seed: u64, domain: StreamDomain, ids: [u64; 3]) -> ChaCha8Rng {
    debug_assert!(ids[2] < (1 << 56), "third id word exceeds 56 bits");
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8] = domain.tag();
    seed[9..17].copy_from_slice(&ids[0].to_le_bytes());
    seed[17..25].copy_from_slice(&ids[1].to_le_bytes());
    seed[25..32].copy_from_slice(&ids[2].to_le_bytes()[0..7]);
    ChaCha8Rng::from_seed(seed)
}

/// Stable 64-bit FNV-1a hash, used to fold string job ids into stream keys.
pub fn stable_hash64(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
