//! Country indicators for a single subject/year slice: regression-based and
//! weighted geometric means, fractional arithmetic means and top-X% shares,
//! with their analytic and bootstrap confidence intervals.
//!
//! Every mean-based indicator is a country mean divided by the matching
//! whole-slice mean, so 1.0 means "at the world average".

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, CountryCode, CountrySet, SubjectYearSlice};
use crate::regression::{self, RegressionError};
use crate::stats::{self, CiMode, Interval, StatsError};

/// Sample size below which a proportion interval is flagged as unreliable.
pub const PROPORTION_MIN_RECOMMENDED_N: f64 = 30.0;

/// Relative tolerance used when locating the top-X% threshold, so that a
/// target count such as `0.3 × 10` is not pushed past an exact boundary by
/// rounding.
const THRESHOLD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndicatorError {
    #[error("country {0} has no articles in this slice")]
    NoArticles(String),
    #[error("overall mean is {0}; indicator undefined")]
    DivisionDegenerate(f64),
    #[error("confidence interval unavailable: {0}")]
    CiUnavailable(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "REG_GEO")]
    RegGeo,
    #[serde(rename = "GEO")]
    Geo,
    #[serde(rename = "ARITH")]
    Arith,
    #[serde(rename = "TOP_X")]
    TopX,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::RegGeo, Method::Geo, Method::Arith, Method::TopX];

    pub fn tag(&self) -> &'static str {
        match self {
            Method::RegGeo => "REG_GEO",
            Method::Geo => "GEO",
            Method::Arith => "ARITH",
            Method::TopX => "TOP_X",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown method {s:?} (expected REG_GEO, GEO, ARITH or TOP_X)"))
    }
}

/// Statistic recomputed on each bootstrap replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BootstrapStatistic {
    #[serde(rename = "GEO")]
    Geo,
    #[serde(rename = "ARITH")]
    Arith,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 999,
            level: 0.95,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<(), IndicatorError> {
        if self.replicates == 0 {
            return Err(IndicatorError::InvalidParameter("bootstrap replicates must be ≥ 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(IndicatorError::InvalidParameter(format!(
                "confidence level {} must lie in (0, 1)",
                self.level
            )));
        }
        Ok(())
    }
}

/// Parameters an indicator was computed with.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_mode: Option<CiMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorResult {
    pub country: CountryCode,
    pub method: Method,
    pub estimate: f64,
    pub ci: Option<Interval>,
    /// Weighted article count `n_c`.
    pub n_c: f64,
    /// Country mean before division by the world mean (GEO, ARITH, REG_GEO).
    pub mean: Option<f64>,
    /// Interval on the un-normalised mean.
    pub mean_ci: Option<Interval>,
    pub params: MethodParams,
    pub warnings: Vec<String>,
}

impl IndicatorResult {
    fn new(country: &CountryCode, method: Method, estimate: f64, n_c: f64) -> Self {
        IndicatorResult {
            country: country.clone(),
            method,
            estimate,
            ci: None,
            n_c,
            mean: None,
            mean_ci: None,
            params: MethodParams::default(),
            warnings: Vec::new(),
        }
    }
}

/// Citations and one country's weights, shared by every indicator.
struct CountryView {
    citations: Vec<u64>,
    weights: Vec<f64>,
    n_c: f64,
}

impl CountryView {
    fn new(
        slice: &SubjectYearSlice,
        country: &CountryCode,
        countries: &CountrySet,
    ) -> Result<Self, IndicatorError> {
        let weights = slice.share_column(country, countries)?;
        let n_c: f64 = weights.iter().sum();
        if !(n_c > 0.0) {
            return Err(IndicatorError::NoArticles(country.to_string()));
        }
        Ok(CountryView {
            citations: slice.citations(),
            weights,
            n_c,
        })
    }
}

/// Overall geometric mean `μ_g` of the slice, unit weights.
pub fn overall_geometric_mean(slice: &SubjectYearSlice) -> Result<f64, IndicatorError> {
    let c = slice.citations();
    Ok(stats::geometric_mean(&c, &vec![1.0; c.len()])?)
}

/// Overall arithmetic mean `μ` of the slice.
pub fn overall_arithmetic_mean(slice: &SubjectYearSlice) -> Result<f64, IndicatorError> {
    let c = slice.citations();
    Ok(stats::arithmetic_mean(&c, &vec![1.0; c.len()])?)
}

fn positive_denominator(mu: f64) -> Result<f64, IndicatorError> {
    if mu > 0.0 {
        Ok(mu)
    } else {
        Err(IndicatorError::DivisionDegenerate(mu))
    }
}

/// A slice's fitted log-citation model together with its `μ_g`, shared by
/// the regression indicators of every focal country.
#[derive(Debug, Clone)]
pub struct RegGeoModel {
    fit: regression::RegressionFit,
    mu_g: f64,
}

impl RegGeoModel {
    pub fn fit(slice: &SubjectYearSlice, countries: &CountrySet) -> Result<Self, IndicatorError> {
        let fit = regression::ols_fit(&regression::build_design(slice, countries))?;
        let mu_g = positive_denominator(overall_geometric_mean(slice)?)?;
        Ok(RegGeoModel { fit, mu_g })
    }

    pub fn regression(&self) -> &regression::RegressionFit {
        &self.fit
    }

    pub fn overall_geometric_mean(&self) -> f64 {
        self.mu_g
    }

    /// Indicator for `country`, with a t-based interval when `ci` is given.
    /// An unavailable interval leaves `ci` empty with a warning.
    pub fn indicator(
        &self,
        slice: &SubjectYearSlice,
        country: &CountryCode,
        countries: &CountrySet,
        ci: Option<(f64, CiMode)>,
    ) -> Result<IndicatorResult, IndicatorError> {
        let n_c = CountryView::new(slice, country, countries)?.n_c;
        let estimate = regression::reg_indicator(&self.fit, self.mu_g, country)?;
        let mut r = IndicatorResult::new(country, Method::RegGeo, estimate, n_c);
        r.mean = Some(self.fit.pure_prediction(country)?.exp_m1());
        if self.fit.rank_deficient() {
            r.warnings.push("rank-deficient design".into());
        }
        if let Some((level, mode)) = ci {
            r.params.level = Some(level);
            r.params.ci_mode = Some(mode);
            match regression::reg_indicator_ci(&self.fit, self.mu_g, country, level, mode) {
                Ok(ci) => {
                    r.ci = Some(ci);
                    r.mean_ci = Some(Interval::new(ci.low * self.mu_g, ci.high * self.mu_g));
                }
                Err(RegressionError::CiUnavailable(msg)) => {
                    r.warnings.push(format!("ci unavailable: {msg}"))
                }
                Err(e) => return Err(e.into()),
            }
        }
        Ok(r)
    }
}

/// Regression-based indicator `(exp(a + β_c) − 1) / μ_g` for a focal country.
pub fn reg_geo_indicator(
    slice: &SubjectYearSlice,
    country: &CountryCode,
    countries: &CountrySet,
) -> Result<IndicatorResult, IndicatorError> {
    RegGeoModel::fit(slice, countries)?.indicator(slice, country, countries, None)
}

pub fn reg_geo_indicator_with_ci(
    slice: &SubjectYearSlice,
    country: &CountryCode,
    countries: &CountrySet,
    level: f64,
    mode: CiMode,
) -> Result<IndicatorResult, IndicatorError> {
    RegGeoModel::fit(slice, countries)?.indicator(slice, country, countries, Some((level, mode)))
}

/// Weighted geometric-mean indicator `μ_gc / μ_g`.
pub fn geo_indicator(
    slice: &SubjectYearSlice,
    country: &CountryCode,
    countries: &CountrySet,
) -> Result<IndicatorResult, IndicatorError> {
    let view = CountryView::new(slice, country, countries)?;
    let mu_g = positive_denominator(overall_geometric_mean(slice)?)?;
    let mu_gc = stats::geometric_mean(&view.citations, &view.weights)?;
    let mut r = IndicatorResult::new(country, Method::Geo, mu_gc / mu_g, view.n_c);
    r.mean = Some(mu_gc);
    Ok(r)
}

/// Interval for the GEO indicator together with the matching interval on
/// the un-normalised geometric mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoInterval {
    pub indicator: Interval,
    pub mean: Interval,
}

/// Corrected mode: `(exp(m_c ± z s_c / √n_c) − 1) / μ_g` on the log scale.
/// Literal mode: `(μ_gc ± s_c / √n_c) / μ_g`, no log-scale back-transform.
/// `s_c` is the frequency-weighted standard deviation of `ln(1 + c)`.
pub fn geo_indicator_ci(
    slice: &SubjectYearSlice,
    country: &CountryCode,
    countries: &CountrySet,
    level: f64,
    mode: CiMode,
) -> Result<GeoInterval, IndicatorError> {
    let view = CountryView::new(slice, country, countries)?;
    let mu_g = positive_denominator(overall_geometric_mean(slice)?)?;
    let logs: Vec<f64> = view.citations.iter().map(|&c| stats::log1p_transform(c)).collect();
    let summary = stats::weighted_summary(&logs, &view.weights).map_err(|e| {
        IndicatorError::CiUnavailable(format!("n_c = {}: {e}", view.n_c))
    })?;
    let half = summary.sd / summary.weight.sqrt();
    let mean = match mode {
        CiMode::Corrected => {
            let z = stats::normal_critical(level)?;
            Interval::new((summary.mean - z * half).exp_m1(), (summary.mean + z * half).exp_m1())
        }
        CiMode::Literal => {
            let mu_gc = summary.mean.exp_m1();
            Interval::new(mu_gc - half, mu_gc + half)
        }
    };
    Ok(GeoInterval {
        indicator: Interval::new(mean.low / mu_g, mean.high / mu_g),
        mean,
    })
}

pub fn geo_indicator_with_ci(
    slice: &SubjectYearSlice,
    country: &CountryCode,
    countries: &CountrySet,
    level: f64,
    mode: CiMode,
) -> Result<IndicatorResult, IndicatorError> {
    let mut r = geo_indicator(slice, country, countries)?;
    r.params.level = Some(level);
    r.params.ci_mode = Some(mode);
    match geo_indicator_ci(slice, country, countries, level, mode) {
        Ok(ci) => {
            r.ci = Some(ci.indicator);
            r.mean_ci = Some(ci.mean);
        }
        Err(IndicatorError::CiUnavailable(msg)) => r.warnings.push(format!("ci unavailable: {msg}")),
        Err(e) => return Err(e),
    }
    Ok(r)
}

/// Fractional arithmetic-mean indicator `μ_c / μ`.
pub fn arith_indicator(
    slice: &SubjectYearSlice,
    country: &CountryCode,
    countries: &CountrySet,
) -> Result<IndicatorResult, IndicatorError> {
    let view = CountryView::new(slice, country, countries)?;
    let mu = positive_denominator(overall_arithmetic_mean(slice)?)?;
    let mu_c = stats::arithmetic_mean(&view.citations, &view.weights)?;
    let mut r = IndicatorResult::new(country, Method::Arith, mu_c / mu, view.n_c);
    r.mean = Some(mu_c);
    Ok(r)
}

fn check_top_x(x: f64) -> Result<(), IndicatorError> {
    if x > 0.0 && x < 100.0 {
        Ok(())
    } else {
        Err(IndicatorError::InvalidParameter(format!("X = {x} must lie in (0, 100)")))
    }
}

/// Credit of each article towards the top X%: 1 strictly above the
/// threshold, `(q − above) / tied` at it and 0 below, where `q = X n / 100`.
/// Credits always sum to `q`.
pub fn top_credits(citations: &[u64], x: f64) -> Result<Vec<f64>, IndicatorError> {
    check_top_x(x)?;
    let n = citations.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let q = x * n as f64 / 100.0;
    let mut sorted = citations.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    // smallest citation value whose "at or above" count reaches q
    let mut threshold = sorted[0];
    let mut i = 0;
    while i < n {
        let value = sorted[i];
        let mut j = i;
        while j < n && sorted[j] == value {
            j += 1;
        }
        threshold = value;
        if j as f64 >= q - THRESHOLD_TOLERANCE * n as f64 {
            break;
        }
        i = j;
    }
    let above = citations.iter().filter(|&&c| c > threshold).count();
    let tied = citations.iter().filter(|&&c| c == threshold).count();
    let tie_credit = ((q - above as f64) / tied as f64).clamp(0.0, 1.0);
    Ok(citations
        .iter()
        .map(|&c| match c.cmp(&threshold) {
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Equal => tie_credit,
            std::cmp::Ordering::Less => 0.0,
        })
        .collect())
}

/// Share `Σ p_c credit / n_c` of a country's articles in the world's top X%.
pub fn top_share(
    slice: &SubjectYearSlice,
    country: &CountryCode,
    countries: &CountrySet,
    x: f64,
) -> Result<IndicatorResult, IndicatorError> {
    let view = CountryView::new(slice, country, countries)?;
    let credits = top_credits(&view.citations, x)?;
    let hits: f64 = credits.iter().zip(&view.weights).map(|(c, w)| c * w).sum();
    let estimate = (hits / view.n_c).clamp(0.0, 1.0);
    let mut r = IndicatorResult::new(country, Method::TopX, estimate, view.n_c);
    r.params.top_x = Some(x);
    Ok(r)
}

/// Wald interval `t ± z sqrt(t (1 − t) / n_c)` truncated to [0, 1], with
/// warnings about the infinite-population and fractional-count assumptions.
pub fn top_share_ci(result: &IndicatorResult, level: f64) -> Result<(Interval, Vec<String>), IndicatorError> {
    if result.method != Method::TopX {
        return Err(IndicatorError::InvalidParameter(format!(
            "proportion interval needs a TOP_X result, got {}",
            result.method
        )));
    }
    let t = result.estimate;
    if !(t > 0.0 && t < 1.0) {
        return Err(IndicatorError::CiUnavailable(format!(
            "proportion {t} is at the boundary"
        )));
    }
    let z = stats::normal_critical(level)?;
    let half = z * (t * (1.0 - t) / result.n_c).sqrt();
    let mut warnings = vec![
        "proportion interval assumes an infinite population".to_string(),
        "proportion interval treats fractional counts as whole articles".to_string(),
    ];
    if result.n_c < PROPORTION_MIN_RECOMMENDED_N {
        warnings.push(format!(
            "n_c = {} is below the recommended {PROPORTION_MIN_RECOMMENDED_N}",
            result.n_c
        ));
    }
    Ok((Interval::new((t - half).max(0.0), (t + half).min(1.0)), warnings))
}

pub fn top_share_with_ci(
    slice: &SubjectYearSlice,
    country: &CountryCode,
    countries: &CountrySet,
    x: f64,
    level: f64,
) -> Result<IndicatorResult, IndicatorError> {
    let mut r = top_share(slice, country, countries, x)?;
    r.params.level = Some(level);
    match top_share_ci(&r, level) {
        Ok((ci, warnings)) => {
            r.ci = Some(ci);
            r.warnings.extend(warnings);
        }
        Err(IndicatorError::CiUnavailable(msg)) => r.warnings.push(format!("ci unavailable: {msg}")),
        Err(e) => return Err(e),
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapInterval {
    /// Interval on the normalised indicator.
    pub indicator: Interval,
    /// Interval on the un-normalised country mean.
    pub mean: Interval,
    pub used: usize,
    pub skipped: usize,
}

/// Percentile bootstrap over whole articles. Each replicate draws `n`
/// articles with replacement from its own ChaCha stream `(seed, replicate)`,
/// so results do not depend on scheduling.
pub fn bootstrap_ci(
    slice: &SubjectYearSlice,
    country: &CountryCode,
    countries: &CountrySet,
    statistic: BootstrapStatistic,
    config: &BootstrapConfig,
) -> Result<BootstrapInterval, IndicatorError> {
    config.validate()?;
    let view = CountryView::new(slice, country, countries)?;
    let n = view.citations.len();
    let values: Vec<f64> = match statistic {
        BootstrapStatistic::Geo => view.citations.iter().map(|&c| stats::log1p_transform(c)).collect(),
        BootstrapStatistic::Arith => view.citations.iter().map(|&c| c as f64).collect(),
    };
    let finish = |m: f64| match statistic {
        BootstrapStatistic::Geo => m.exp_m1(),
        BootstrapStatistic::Arith => m,
    };

    let replicates: Vec<Option<(f64, f64)>> = (0..config.replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(b as u64);
            let (mut sum_all, mut sum_w, mut sum_wx) = (0.0, 0.0, 0.0);
            for _ in 0..n {
                let i = rng.random_range(0..n);
                let x = values[i];
                let w = view.weights[i];
                sum_all += x;
                sum_w += w;
                sum_wx += w * x;
            }
            if !(sum_w > 0.0) {
                return None;
            }
            let overall = finish(sum_all / n as f64);
            let mean = finish(sum_wx / sum_w);
            (overall > 0.0).then(|| (mean / overall, mean))
        })
        .collect();

    let (mut ratios, mut means): (Vec<f64>, Vec<f64>) = replicates.iter().flatten().copied().unzip();
    let used = ratios.len();
    let skipped = config.replicates - used;
    if used == 0 {
        return Err(IndicatorError::CiUnavailable(format!(
            "all {} bootstrap replicates were degenerate",
            config.replicates
        )));
    }
    ratios.sort_by(f64::total_cmp);
    means.sort_by(f64::total_cmp);
    let lo = (1.0 - config.level) / 2.0;
    let hi = (1.0 + config.level) / 2.0;
    let q = |v: &[f64], p: f64| stats::quantile_sorted(v, p).expect("non-empty");
    Ok(BootstrapInterval {
        indicator: Interval::new(q(&ratios, lo), q(&ratios, hi)),
        mean: Interval::new(q(&means, lo), q(&means, hi)),
        used,
        skipped,
    })
}

/// Point estimate for `statistic` with its bootstrap interval attached.
pub fn bootstrap_indicator(
    slice: &SubjectYearSlice,
    country: &CountryCode,
    countries: &CountrySet,
    statistic: BootstrapStatistic,
    config: &BootstrapConfig,
) -> Result<IndicatorResult, IndicatorError> {
    let mut r = match statistic {
        BootstrapStatistic::Geo => geo_indicator(slice, country, countries)?,
        BootstrapStatistic::Arith => arith_indicator(slice, country, countries)?,
    };
    r.params.level = Some(config.level);
    r.params.bootstrap = Some(*config);
    match bootstrap_ci(slice, country, countries, statistic, config) {
        Ok(b) => {
            r.ci = Some(b.indicator);
            r.mean_ci = Some(b.mean);
            if b.skipped > 0 {
                r.warnings.push(format!("{} bootstrap replicates skipped", b.skipped));
            }
        }
        Err(IndicatorError::CiUnavailable(msg)) => r.warnings.push(format!("ci unavailable: {msg}")),
        Err(e) => return Err(e),
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_corpus, ArticleRecord};
    use approx::assert_relative_eq;
    use std::collections::BTreeMap;

    fn code(s: &str) -> CountryCode {
        CountryCode::new(s).unwrap()
    }

    fn set(codes: &[&str]) -> CountrySet {
        CountrySet::new(codes.iter().map(|c| code(c)).collect()).unwrap()
    }

    fn slice_of(rows: &[(u64, &[(&str, u32)])]) -> SubjectYearSlice {
        let mut s = SubjectYearSlice::new("S", 2012);
        for (i, (c, authors)) in rows.iter().enumerate() {
            let authors: BTreeMap<_, _> = authors.iter().map(|(k, n)| (code(k), *n)).collect();
            s.push(ArticleRecord::new(format!("a{i}"), "S", 2012, *c, authors).unwrap())
                .unwrap();
        }
        s
    }

    fn toy() -> SubjectYearSlice {
        let csv = "id,subject,year,citations,affiliations\n\
                   p1,Toy,2012,12,A:1\np2,Toy,2012,6,A:1;B:1\np3,Toy,2012,0,B:1\n";
        parse_corpus(csv.as_bytes()).unwrap().slices.remove(0)
    }

    #[test]
    fn toy_arithmetic_indicators() {
        let s = toy();
        let ab = set(&["A", "B"]);
        let a = arith_indicator(&s, &code("A"), &ab).unwrap();
        let b = arith_indicator(&s, &code("B"), &ab).unwrap();
        assert_relative_eq!(a.mean.unwrap(), 10.0, epsilon = 1e-12);
        assert_relative_eq!(b.mean.unwrap(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(a.estimate, 10.0 / 6.0, epsilon = 1e-12);
        assert_relative_eq!(b.estimate, 2.0 / 6.0, epsilon = 1e-12);
        assert_relative_eq!(a.estimate / b.estimate, 5.0, epsilon = 1e-12);
        assert_eq!(a.n_c, 1.5);
    }

    #[test]
    fn toy_geometric_indicator() {
        let s = toy();
        let r = geo_indicator(&s, &code("A"), &set(&["A", "B"])).unwrap();
        let mu_ga = ((13f64.ln() + 0.5 * 7f64.ln()) / 1.5).exp() - 1.0;
        let mu_g = ((13f64.ln() + 7f64.ln()) / 3.0).exp() - 1.0;
        // frozen from direct evaluation of both closed forms
        assert_relative_eq!(mu_ga, 9.576165743612922, max_relative = 1e-12);
        assert_relative_eq!(mu_g, 3.497941445275414, max_relative = 1e-12);
        assert_relative_eq!(r.mean.unwrap(), mu_ga, max_relative = 1e-12);
        assert_relative_eq!(r.estimate, 2.737657531845543, max_relative = 1e-12);
    }

    #[test]
    fn single_country_corpus_scores_one() {
        let s = slice_of(&[(3, &[("C", 1)]), (10, &[("C", 2)]), (0, &[("C", 1)]), (7, &[("C", 1)])]);
        let c = set(&["C"]);
        assert_eq!(geo_indicator(&s, &code("C"), &c).unwrap().estimate, 1.0);
        assert_relative_eq!(arith_indicator(&s, &code("C"), &c).unwrap().estimate, 1.0, epsilon = 1e-12);
        assert_relative_eq!(reg_geo_indicator(&s, &code("C"), &c).unwrap().estimate, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn uncited_country_scores_zero() {
        let s = slice_of(&[(0, &[("A", 1)]), (0, &[("A", 1), ("B", 1)]), (5, &[("B", 1)])]);
        let r = geo_indicator(&s, &code("A"), &set(&["A", "B"])).unwrap();
        assert_eq!(r.estimate, 0.0);
    }

    #[test]
    fn uniform_citations_score_one() {
        let s = slice_of(&[(4, &[("A", 1)]), (4, &[("A", 1), ("B", 3)]), (4, &[("B", 1)]), (4, &[("Z", 1)])]);
        let c = set(&["A", "B"]);
        for country in ["A", "B", OTHERS_STR] {
            assert_relative_eq!(arith_indicator(&s, &code(country), &c).unwrap().estimate, 1.0, epsilon = 1e-12);
        }
    }

    const OTHERS_STR: &str = crate::corpus::OTHERS;

    #[test]
    fn absent_country_and_degenerate_world() {
        let s = slice_of(&[(0, &[("A", 1)]), (0, &[("B", 1)])]);
        let c = set(&["A", "B", "Z"]);
        assert!(matches!(geo_indicator(&s, &code("Z"), &c), Err(IndicatorError::NoArticles(_))));
        assert!(matches!(geo_indicator(&s, &code("A"), &c), Err(IndicatorError::DivisionDegenerate(_))));
        assert!(matches!(arith_indicator(&s, &code("A"), &c), Err(IndicatorError::DivisionDegenerate(_))));
    }

    #[test]
    fn geo_ci_zero_width_for_constant_logs() {
        let s = slice_of(&[(5, &[("A", 1)]), (5, &[("A", 1)]), (5, &[("A", 1)]), (0, &[("B", 1)])]);
        let c = set(&["A", "B"]);
        let point = geo_indicator(&s, &code("A"), &c).unwrap().estimate;
        for mode in [CiMode::Corrected, CiMode::Literal] {
            let ci = geo_indicator_ci(&s, &code("A"), &c, 0.95, mode).unwrap().indicator;
            assert_relative_eq!(ci.low, point, max_relative = 1e-12);
            assert_relative_eq!(ci.high, point, max_relative = 1e-12);
        }
    }

    #[test]
    fn geo_ci_shapes() {
        let s = slice_of(&[
            (0, &[("A", 1)]),
            (3, &[("A", 1)]),
            (12, &[("A", 1)]),
            (40, &[("A", 1), ("B", 1)]),
            (2, &[("B", 1)]),
        ]);
        let c = set(&["A", "B"]);
        let point = geo_indicator(&s, &code("A"), &c).unwrap().estimate;
        let corrected = geo_indicator_ci(&s, &code("A"), &c, 0.95, CiMode::Corrected).unwrap().indicator;
        assert!(corrected.high - point > point - corrected.low);
        let literal = geo_indicator_ci(&s, &code("A"), &c, 0.95, CiMode::Literal).unwrap().indicator;
        assert_relative_eq!(literal.high - point, point - literal.low, max_relative = 1e-9);
        // n_c = 1.5 for B is fine; 1.0 or less is not
        let single = slice_of(&[(3, &[("A", 1)]), (5, &[("B", 1)]), (4, &[("B", 1)])]);
        assert!(matches!(
            geo_indicator_ci(&single, &code("A"), &c, 0.95, CiMode::Corrected),
            Err(IndicatorError::CiUnavailable(_))
        ));
    }

    #[test]
    fn tie_example_credits_one_third() {
        // 4 above, 3 tied at the threshold, 3 below; X = 50 → q = 5
        let cites = [50, 40, 30, 20, 10, 10, 10, 5, 2, 1];
        let credits = top_credits(&cites, 50.0).unwrap();
        assert_eq!(&credits[..4], &[1.0; 4]);
        for c in &credits[4..7] {
            assert_relative_eq!(*c, 1.0 / 3.0, epsilon = 1e-15);
        }
        assert_eq!(&credits[7..], &[0.0; 3]);
        assert_relative_eq!(credits.iter().sum::<f64>(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn complete_tie_gives_x_over_100() {
        let s = slice_of(&[(3, &[("A", 1)]), (3, &[("A", 1), ("B", 1)]), (3, &[("B", 2)]), (3, &[("Z", 1)])]);
        let c = set(&["A", "B"]);
        for country in ["A", "B", OTHERS_STR] {
            let r = top_share(&s, &code(country), &c, 10.0).unwrap();
            assert_relative_eq!(r.estimate, 0.10, epsilon = 1e-12);
        }
    }

    #[test]
    fn top_share_by_enumeration() {
        // q = 0.4 × 5 = 2: the two highest-cited articles each earn 1
        let s = slice_of(&[
            (9, &[("A", 1)]),
            (7, &[("A", 1)]),
            (5, &[("B", 1)]),
            (3, &[("B", 1)]),
            (1, &[("C", 1)]),
        ]);
        let c = set(&["A", "B", "C"]);
        assert_eq!(top_share(&s, &code("A"), &c, 40.0).unwrap().estimate, 1.0);
        assert_eq!(top_share(&s, &code("C"), &c, 40.0).unwrap().estimate, 0.0);
        assert_eq!(top_share(&s, &code("B"), &c, 40.0).unwrap().estimate, 0.0);
    }

    #[test]
    fn tiny_x_credits_top_article_fractionally() {
        let credits = top_credits(&[9, 7, 5], 1.0).unwrap();
        assert_relative_eq!(credits[0], 0.03, epsilon = 1e-15);
        assert_eq!(&credits[1..], &[0.0, 0.0]);
        assert!(top_credits(&[1], 0.0).is_err());
        assert!(top_credits(&[1], 100.0).is_err());
    }

    #[test]
    fn proportion_interval() {
        let mut r = IndicatorResult::new(&code("A"), Method::TopX, 0.5, 100.0);
        let (ci, warnings) = top_share_ci(&r, 0.95).unwrap();
        let half = 1.959963984540054 * 0.05;
        assert_relative_eq!(ci.low, 0.5 - half, epsilon = 1e-9);
        assert_relative_eq!(ci.high, 0.5 + half, epsilon = 1e-9);
        assert_relative_eq!(half, 0.098, epsilon = 1e-3);
        assert_eq!(warnings.len(), 2);
        let mut last = ci.width();
        for n in [200.0, 1000.0, 1e6] {
            r.n_c = n;
            let w = top_share_ci(&r, 0.95).unwrap().0.width();
            assert!(w < last);
            last = w;
        }
        r.estimate = 0.0;
        assert!(matches!(top_share_ci(&r, 0.95), Err(IndicatorError::CiUnavailable(_))));
        r.estimate = 0.02;
        r.n_c = 10.0;
        let (ci, warnings) = top_share_ci(&r, 0.95).unwrap();
        assert_eq!(ci.low, 0.0);
        assert_eq!(warnings.len(), 3);
    }

    #[test]
    fn bootstrap_constant_corpus_is_point() {
        let s = slice_of(&[(4, &[("A", 1)]), (4, &[("A", 1), ("B", 1)]), (4, &[("B", 1)]), (4, &[("B", 1)])]);
        let cfg = BootstrapConfig { replicates: 199, level: 0.95, seed: 3 };
        for stat in [BootstrapStatistic::Geo, BootstrapStatistic::Arith] {
            let b = bootstrap_ci(&s, &code("A"), &set(&["A", "B"]), stat, &cfg).unwrap();
            assert_relative_eq!(b.indicator.low, 1.0, epsilon = 1e-12);
            assert_relative_eq!(b.indicator.high, 1.0, epsilon = 1e-12);
            assert!(b.skipped > 0);
        }
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let rows: Vec<(u64, &[(&str, u32)])> = (0..60u64)
            .map(|i| (i * 7 % 23, if i % 3 == 0 { &[("A", 1)][..] } else { &[("B", 1)][..] }))
            .collect();
        let s = slice_of(&rows);
        let cfg = BootstrapConfig { replicates: 999, level: 0.95, seed: 42 };
        let c = set(&["A", "B"]);
        let a = bootstrap_ci(&s, &code("A"), &c, BootstrapStatistic::Geo, &cfg).unwrap();
        let b = bootstrap_ci(&s, &code("A"), &c, BootstrapStatistic::Geo, &cfg).unwrap();
        assert_eq!(a, b);
        let point = geo_indicator(&s, &code("A"), &c).unwrap().estimate;
        assert!(a.indicator.low < point && point < a.indicator.high);
        let other = bootstrap_ci(&s, &code("A"), &c, BootstrapStatistic::Geo, &BootstrapConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn bootstrap_all_skipped() {
        // the country owns one article out of many; a tiny replicate count
        // can miss it entirely
        let mut rows: Vec<(u64, &[(&str, u32)])> = vec![(5, &[("A", 1)])];
        rows.extend((0..500).map(|i| (i as u64 % 7, &[("B", 1)][..])));
        let s = slice_of(&rows);
        let cfg = BootstrapConfig { replicates: 1, level: 0.95, seed: 1 };
        let c = set(&["A", "B"]);
        match bootstrap_ci(&s, &code("A"), &c, BootstrapStatistic::Arith, &cfg) {
            Ok(b) => assert_eq!(b.used, 1),
            Err(e) => assert!(matches!(e, IndicatorError::CiUnavailable(_))),
        }
        assert!(bootstrap_ci(&s, &code("A"), &c, BootstrapStatistic::Arith, &BootstrapConfig { replicates: 0, ..cfg }).is_err());
    }

    #[test]
    fn methods_parse() {
        assert_eq!("reg_geo".parse::<Method>().unwrap(), Method::RegGeo);
        assert_eq!("TOP_X".parse::<Method>().unwrap(), Method::TopX);
        assert!("median".parse::<Method>().is_err());
    }
}
