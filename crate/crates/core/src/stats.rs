//! Transforms, moment diagnostics and the weighted means behind every
//! indicator.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

/// Rule-of-thumb bound on skewness and kurtosis for near-normal data.
pub const ACCEPTABLE_MOMENT_BOUND: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("degenerate sample: {0}")]
    Degenerate(String),
    #[error("empty sample: total weight is zero")]
    EmptySample,
    #[error("length mismatch: {values} values but {weights} weights")]
    LengthMismatch { values: usize, weights: usize },
    #[error("invalid weight {0}: weights must be finite and non-negative")]
    InvalidWeight(f64),
    #[error("confidence level {0} must lie strictly between 0 and 1")]
    InvalidLevel(f64),
    #[error("degrees of freedom must be positive, got {0}")]
    InvalidDf(f64),
}

/// Closed confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn new(low: f64, high: f64) -> Self {
        Interval { low, high }
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    /// Containment with a relative slack of `rel_tol` on each bound.
    pub fn contains(&self, x: f64, rel_tol: f64) -> bool {
        let slack = rel_tol * x.abs().max(self.low.abs()).max(self.high.abs());
        x >= self.low - slack && x <= self.high + slack
    }

    /// Whether `inner` lies within `self`.
    pub fn encloses(&self, inner: &Interval) -> bool {
        self.low <= inner.low && inner.high <= self.high
    }
}

/// Which interval construction to use where the printed formula and the
/// statistically calibrated one differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CiMode {
    Literal,
    Corrected,
}

impl std::str::FromStr for CiMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "literal" => Ok(CiMode::Literal),
            "corrected" => Ok(CiMode::Corrected),
            other => Err(format!("unknown CI mode {other:?} (expected literal or corrected)")),
        }
    }
}

impl std::fmt::Display for CiMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CiMode::Literal => "literal",
            CiMode::Corrected => "corrected",
        })
    }
}

/// `ln(1 + citations)`.
pub fn log1p_transform(citations: u64) -> f64 {
    (citations as f64).ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub n: usize,
    pub mean: f64,
    pub skewness: f64,
    /// Non-excess kurtosis (about 3 for normal data).
    pub kurtosis: f64,
    pub skewness_acceptable: bool,
    pub kurtosis_acceptable: bool,
}

/// Skewness `m3 / m2^1.5` and kurtosis `m4 / m2^2` from biased central moments.
pub fn moments(values: &[f64]) -> Result<MomentReport, StatsError> {
    let n = values.len();
    if n < 3 {
        return Err(StatsError::Degenerate(format!("need at least 3 values, got {n}")));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in values {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let scale = values.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    if !(m2 > (f64::EPSILON * scale).powi(2)) {
        return Err(StatsError::Degenerate("sample has zero variance".into()));
    }
    let skewness = m3 / m2.powf(1.5);
    let kurtosis = m4 / (m2 * m2);
    Ok(MomentReport {
        n,
        mean,
        skewness,
        kurtosis,
        skewness_acceptable: skewness.abs() <= ACCEPTABLE_MOMENT_BOUND,
        kurtosis_acceptable: kurtosis.abs() <= ACCEPTABLE_MOMENT_BOUND,
    })
}

fn check_weights(len: usize, weights: &[f64]) -> Result<f64, StatsError> {
    if len != weights.len() {
        return Err(StatsError::LengthMismatch {
            values: len,
            weights: weights.len(),
        });
    }
    let mut total = 0.0;
    for &w in weights {
        if !(w.is_finite() && w >= 0.0) {
            return Err(StatsError::InvalidWeight(w));
        }
        total += w;
    }
    if total > 0.0 {
        Ok(total)
    } else {
        Err(StatsError::EmptySample)
    }
}

/// Weighted mean of arbitrary values.
pub fn weighted_mean(values: &[f64], weights: &[f64]) -> Result<f64, StatsError> {
    let total = check_weights(values.len(), weights)?;
    Ok(values.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() / total)
}

/// Weighted mean of `ln(1 + c)`.
pub fn weighted_log_mean(citations: &[u64], weights: &[f64]) -> Result<f64, StatsError> {
    let total = check_weights(citations.len(), weights)?;
    Ok(citations
        .iter()
        .zip(weights)
        .map(|(&c, w)| log1p_transform(c) * w)
        .sum::<f64>()
        / total)
}

/// `exp(Σ w ln(1+c) / Σ w) − 1`.
pub fn geometric_mean(citations: &[u64], weights: &[f64]) -> Result<f64, StatsError> {
    Ok(weighted_log_mean(citations, weights)?.exp_m1())
}

/// `Σ w c / Σ w`.
pub fn arithmetic_mean(citations: &[u64], weights: &[f64]) -> Result<f64, StatsError> {
    let total = check_weights(citations.len(), weights)?;
    Ok(citations
        .iter()
        .zip(weights)
        .map(|(&c, w)| c as f64 * w)
        .sum::<f64>()
        / total)
}

/// Weighted mean, frequency-weighted sample standard deviation
/// `sqrt(Σ w (x − m)² / (Σ w − 1))`, and total weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedSummary {
    pub mean: f64,
    pub sd: f64,
    pub weight: f64,
}

pub fn weighted_summary(values: &[f64], weights: &[f64]) -> Result<WeightedSummary, StatsError> {
    let total = check_weights(values.len(), weights)?;
    if total <= 1.0 {
        return Err(StatsError::Degenerate(format!(
            "total weight {total} leaves no degrees of freedom"
        )));
    }
    let shift = values.first().copied().unwrap_or(0.0);
    let mean = shift + values.iter().zip(weights).map(|(x, w)| (x - shift) * w).sum::<f64>() / total;
    let ss: f64 = values
        .iter()
        .zip(weights)
        .map(|(x, w)| w * (x - mean).powi(2))
        .sum();
    Ok(WeightedSummary {
        mean,
        sd: (ss / (total - 1.0)).sqrt(),
        weight: total,
    })
}

/// Median with the two-central-value midpoint for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 0 {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    })
}

/// Empirical quantile by linear interpolation between order statistics at
/// position `p (n + 1)`, clamped to the sample range. For 999 replicates the
/// 2.5% and 97.5% points land exactly on the 25th and 975th values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> Option<f64> {
    let n = sorted.len();
    if n == 0 {
        return None;
    }
    let pos = (p * (n as f64 + 1.0)).clamp(1.0, n as f64);
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    let lower = sorted[lo - 1];
    if frac == 0.0 || lo == n {
        Some(lower)
    } else {
        Some(lower + frac * (sorted[lo] - lower))
    }
}

fn check_level(level: f64) -> Result<(), StatsError> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(StatsError::InvalidLevel(level))
    }
}

/// Two-sided standard normal critical value, 1.959964… at level 0.95.
pub fn normal_critical(level: f64) -> Result<f64, StatsError> {
    check_level(level)?;
    let n = Normal::standard();
    Ok(n.inverse_cdf(0.5 + level / 2.0))
}

/// Two-sided Student-t critical value for `df` degrees of freedom.
pub fn t_critical(level: f64, df: f64) -> Result<f64, StatsError> {
    check_level(level)?;
    if !(df > 0.0) {
        return Err(StatsError::InvalidDf(df));
    }
    let t = StudentsT::new(0.0, 1.0, df).map_err(|_| StatsError::InvalidDf(df))?;
    Ok(t.inverse_cdf(0.5 + level / 2.0))
}
