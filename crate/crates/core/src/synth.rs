//! Seeded synthetic corpora with known ground truth.
//!
//! Citation counts follow a discretised lognormal: with `Z ~ N(μ, σ)`, an
//! article receives `max(floor(exp(Z)) − 1, 0)` citations, so `ln(1 + c)` is
//! `Z` rounded down onto the log-integer grid.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::corpus::{ArticleRecord, CorpusError, CountryCode, CountrySet, SubjectYearSlice};
use crate::indicators::{self, BootstrapConfig, BootstrapStatistic, IndicatorError, Method, RegGeoModel};
use crate::stats::{self, CiMode};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid spec field {field}: {message}")]
    InvalidSpec { field: String, message: String },
    #[error("invalid coverage options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> SynthError {
    SynthError::InvalidSpec {
        field: field.into(),
        message: message.into(),
    }
}

/// Generator parameters for one country. `articles` is the number of
/// articles with this country as home, per slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountrySpec {
    pub code: CountryCode,
    pub articles: usize,
    pub log_mean: f64,
    pub log_sd: f64,
    #[serde(default)]
    pub collaboration: f64,
    /// Partner weights; empty means uniform over the other countries.
    #[serde(default)]
    pub partners: BTreeMap<CountryCode, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub subjects: Vec<String>,
    pub years: Vec<i32>,
    pub countries: Vec<CountrySpec>,
}

impl SynthSpec {
    /// Two countries, one subject and year, no collaboration.
    pub fn two_country(seed: u64, articles: usize, log_means: (f64, f64), log_sd: f64) -> Self {
        let country = |code: &str, mu: f64| CountrySpec {
            code: CountryCode::new(code).expect("valid code"),
            articles,
            log_mean: mu,
            log_sd,
            collaboration: 0.0,
            partners: BTreeMap::new(),
        };
        SynthSpec {
            seed,
            subjects: vec!["Synthetic".into()],
            years: vec![2012],
            countries: vec![country("A", log_means.0), country("B", log_means.1)],
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.subjects.is_empty() {
            return Err(invalid("subjects", "at least one subject is required"));
        }
        if self.years.is_empty() {
            return Err(invalid("years", "at least one year is required"));
        }
        for (i, s) in self.subjects.iter().enumerate() {
            if s.trim().is_empty() || s.contains([',', '"', '\n']) {
                return Err(invalid(format!("subjects[{i}]"), format!("unusable subject label {s:?}")));
            }
        }
        if self.countries.is_empty() {
            return Err(invalid("countries", "at least one country is required"));
        }
        let codes: Vec<&CountryCode> = self.countries.iter().map(|c| &c.code).collect();
        for (i, c) in self.countries.iter().enumerate() {
            let field = |name: &str| format!("countries[{i}].{name}");
            if c.code.is_others() {
                return Err(invalid(field("code"), "OTHERS is reserved"));
            }
            if codes.iter().filter(|&&k| k == &c.code).count() > 1 {
                return Err(invalid(field("code"), format!("duplicate country {}", c.code)));
            }
            if c.articles == 0 {
                return Err(invalid(field("articles"), "must be at least 1"));
            }
            if !c.log_mean.is_finite() {
                return Err(invalid(field("log_mean"), "must be finite"));
            }
            if !(c.log_sd > 0.0 && c.log_sd.is_finite()) {
                return Err(invalid(field("log_sd"), format!("must be positive, got {}", c.log_sd)));
            }
            if !(0.0..=1.0).contains(&c.collaboration) {
                return Err(invalid(
                    field("collaboration"),
                    format!("must lie in [0, 1], got {}", c.collaboration),
                ));
            }
            for (p, w) in &c.partners {
                if p == &c.code || !codes.contains(&p) {
                    return Err(invalid(field("partners"), format!("{p} is not another spec country")));
                }
                if !(*w >= 0.0 && w.is_finite()) {
                    return Err(invalid(field("partners"), format!("weight {w} for {p}")));
                }
            }
            if c.collaboration > 0.0 && self.partner_weights(i).is_empty() {
                return Err(invalid(field("partners"), "collaboration needs a partner with positive weight"));
            }
        }
        Ok(())
    }

    /// Normalised partner distribution of country `i`.
    fn partner_weights(&self, i: usize) -> Vec<(usize, f64)> {
        let c = &self.countries[i];
        let raw: Vec<(usize, f64)> = self
            .countries
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(j, other)| {
                let w = if c.partners.is_empty() {
                    1.0
                } else {
                    c.partners.get(&other.code).copied().unwrap_or(0.0)
                };
                (j, w)
            })
            .filter(|&(_, w)| w > 0.0)
            .collect();
        let total: f64 = raw.iter().map(|(_, w)| w).sum();
        raw.into_iter().map(|(j, w)| (j, w / total)).collect()
    }

    pub fn country_set(&self) -> CountrySet {
        CountrySet::new(self.countries.iter().map(|c| c.code.clone()).collect()).expect("validated spec")
    }
}

/// Expectations of one citation distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionTruth {
    /// `E[ln(1 + C)]`.
    pub expected_log1p: f64,
    /// `exp(E[ln(1 + C)]) − 1`.
    pub geometric_mean: f64,
    /// `E[C]`.
    pub arithmetic_mean: f64,
}

impl DistributionTruth {
    fn from_moments(expected_log1p: f64, arithmetic_mean: f64) -> Self {
        DistributionTruth {
            expected_log1p,
            geometric_mean: expected_log1p.exp_m1(),
            arithmetic_mean,
        }
    }

    fn mixture(parts: &[(f64, DistributionTruth)]) -> Self {
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        let log = parts.iter().map(|(w, d)| w * d.expected_log1p).sum::<f64>() / total;
        let arith = parts.iter().map(|(w, d)| w * d.arithmetic_mean).sum::<f64>() / total;
        DistributionTruth::from_moments(log, arith)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryTruth {
    pub spec: CountrySpec,
    /// `exp(μ) − 1`, the latent lognormal's geometric mean before rounding.
    pub latent_geometric_mean: f64,
    /// Citation distribution of articles with this home country.
    pub home: DistributionTruth,
    /// What fractional counting credits to the country once collaborations
    /// are split, in expectation.
    pub credited: DistributionTruth,
    pub geo_indicator: f64,
    pub arith_indicator: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub subjects: Vec<String>,
    pub years: Vec<i32>,
    pub countries: Vec<CountryTruth>,
    /// Whole-slice distribution, unit weight per article.
    pub world: DistributionTruth,
}

impl GroundTruth {
    pub fn country(&self, code: &CountryCode) -> Option<&CountryTruth> {
        self.countries.iter().find(|c| &c.spec.code == code)
    }
}

const TAIL_START: u64 = 200_000;

fn upper_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Exact expectations of the discretised lognormal, summed as
/// `E[C] = Σ_{k≥2} P(e^Z ≥ k)` and
/// `E[ln(1+C)] = Σ_{k≥2} ln(k/(k−1)) P(e^Z ≥ k)`, with the far tail replaced
/// by its continuous counterpart.
pub fn discretised_lognormal(log_mean: f64, log_sd: f64) -> DistributionTruth {
    let (mu, sigma) = (log_mean, log_sd);
    let survival = |k: f64| upper_tail((k.ln() - mu) / sigma);
    let mut log = 0.0;
    let mut arith = 0.0;
    let mut k = 2u64;
    loop {
        let p = survival(k as f64);
        if p < 1e-18 {
            return DistributionTruth::from_moments(log, arith);
        }
        if k > TAIL_START {
            break;
        }
        let kf = k as f64;
        log += (kf / (kf - 1.0)).ln() * p;
        arith += p;
        k += 1;
    }
    let a = k as f64 - 0.5;
    let alpha = (a.ln() - mu) / sigma;
    let density = (-0.5 * alpha * alpha).exp() / (2.0 * std::f64::consts::PI).sqrt();
    log += sigma * density + (mu - a.ln()) * upper_tail(alpha);
    arith += (mu + 0.5 * sigma * sigma).exp() * upper_tail(alpha - sigma) - a * upper_tail(alpha);
    DistributionTruth::from_moments(log, arith)
}

pub fn ground_truth(spec: &SynthSpec) -> Result<GroundTruth, SynthError> {
    spec.validate()?;
    let homes: Vec<DistributionTruth> = spec
        .countries
        .iter()
        .map(|c| discretised_lognormal(c.log_mean, c.log_sd))
        .collect();
    let world = DistributionTruth::mixture(
        &spec
            .countries
            .iter()
            .zip(&homes)
            .map(|(c, d)| (c.articles as f64, *d))
            .collect::<Vec<_>>(),
    );
    let partners: Vec<Vec<(usize, f64)>> = (0..spec.countries.len()).map(|i| spec.partner_weights(i)).collect();
    let countries = spec
        .countries
        .iter()
        .enumerate()
        .map(|(c, cs)| {
            let parts: Vec<(f64, DistributionTruth)> = spec
                .countries
                .iter()
                .enumerate()
                .map(|(h, hs)| {
                    let n = hs.articles as f64;
                    let p = hs.collaboration;
                    let w = if h == c {
                        n * (1.0 - p) + 0.5 * n * p
                    } else {
                        let pi = partners[h].iter().find(|(j, _)| *j == c).map_or(0.0, |(_, w)| *w);
                        0.5 * n * p * pi
                    };
                    (w, homes[h])
                })
                .filter(|(w, _)| *w > 0.0)
                .collect();
            let credited = DistributionTruth::mixture(&parts);
            CountryTruth {
                spec: cs.clone(),
                latent_geometric_mean: cs.log_mean.exp_m1(),
                home: homes[c],
                credited,
                geo_indicator: credited.geometric_mean / world.geometric_mean,
                arith_indicator: credited.arithmetic_mean / world.arithmetic_mean,
            }
        })
        .collect();
    Ok(GroundTruth {
        seed: spec.seed,
        subjects: spec.subjects.clone(),
        years: spec.years.clone(),
        countries,
        world,
    })
}

/// Citation count for a latent log value.
pub fn discretise(z: f64) -> u64 {
    (z.exp().floor() - 1.0).max(0.0) as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub slices: Vec<SubjectYearSlice>,
    pub truth: GroundTruth,
}

fn generate_slice(spec: &SynthSpec, index: usize, subject: &str, year: i32) -> Result<SubjectYearSlice, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let mut slice = SubjectYearSlice::new(subject, year);
    for (i, c) in spec.countries.iter().enumerate() {
        let latent = Normal::new(c.log_mean, c.log_sd).expect("validated spec");
        let partners = spec.partner_weights(i);
        for a in 0..c.articles {
            let citations = discretise(latent.sample(&mut rng));
            let mut authors = BTreeMap::from([(c.code.clone(), 1u32)]);
            if c.collaboration > 0.0 && rng.random_bool(c.collaboration) {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut partner = partners.last().expect("validated spec").0;
                for &(j, w) in &partners {
                    acc += w;
                    if u < acc {
                        partner = j;
                        break;
                    }
                }
                authors.insert(spec.countries[partner].code.clone(), 1);
            }
            let id = format!("{}-{}-{}-{}", subject.replace(' ', "_"), year, c.code, a);
            slice.push(ArticleRecord::new(id, subject, year, citations, authors)?)?;
        }
    }
    Ok(slice)
}

/// Builds every (subject, year) slice, in subject then year order. Slice `i`
/// draws from its own ChaCha stream, so output is independent of scheduling.
pub fn generate_corpus(spec: &SynthSpec) -> Result<SyntheticCorpus, SynthError> {
    let truth = ground_truth(spec)?;
    let cells: Vec<(usize, &String, i32)> = spec
        .subjects
        .iter()
        .flat_map(|s| spec.years.iter().map(move |&y| (s, y)))
        .enumerate()
        .map(|(i, (s, y))| (i, s, y))
        .collect();
    let mut slices = cells
        .par_iter()
        .map(|&(i, s, y)| generate_slice(spec, i, s, y))
        .collect::<Result<Vec<_>, _>>()?;
    slices.sort_by(|a, b| (&a.subject, a.year).cmp(&(&b.subject, b.year)));
    Ok(SyntheticCorpus { slices, truth })
}

pub fn write_truth<W: Write>(mut sink: W, truth: &GroundTruth) -> Result<(), SynthError> {
    serde_json::to_writer_pretty(&mut sink, truth)?;
    sink.write_all(b"\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageOptions {
    pub method: Method,
    pub level: f64,
    /// `None` uses the method's default mode.
    pub ci_mode: Option<CiMode>,
    pub bootstrap: BootstrapConfig,
    /// Focal set used for the computation; the rest become OTHERS.
    pub focal: Vec<CountryCode>,
    pub target: CountryCode,
}

impl CoverageOptions {
    pub fn new(method: Method, target: CountryCode) -> Self {
        CoverageOptions {
            method,
            level: 0.95,
            ci_mode: None,
            bootstrap: BootstrapConfig::default(),
            focal: vec![target.clone()],
            target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub method: Method,
    pub level: f64,
    pub trials: usize,
    /// Intervals computed: one per slice per trial.
    pub intervals: usize,
    /// Intervals containing the country's true mean (GEO and REG_GEO: the
    /// credited geometric mean; ARITH: the credited arithmetic mean).
    pub covered: usize,
    pub coverage: f64,
    /// Intervals on the normalised scale containing the true population
    /// indicator, where the world mean is also a parameter.
    pub ratio_covered: usize,
    pub ratio_coverage: f64,
    /// Slices whose interval was unavailable.
    pub excluded: usize,
    pub mean_width: f64,
    pub median_width: f64,
    pub mean_indicator_width: f64,
    pub median_indicator_width: f64,
}

struct Draw {
    mean_ci: stats::Interval,
    ci: stats::Interval,
}

fn interval_for(
    slice: &SubjectYearSlice,
    countries: &CountrySet,
    options: &CoverageOptions,
    trial_seed: u64,
) -> Result<Option<Draw>, SynthError> {
    let target = &options.target;
    let r = match options.method {
        Method::Geo => indicators::geo_indicator_with_ci(
            slice,
            target,
            countries,
            options.level,
            options.ci_mode.unwrap_or(CiMode::Corrected),
        ),
        Method::RegGeo => RegGeoModel::fit(slice, countries).and_then(|m| {
            m.indicator(
                slice,
                target,
                countries,
                Some((options.level, options.ci_mode.unwrap_or(CiMode::Literal))),
            )
        }),
        Method::Arith => {
            let config = BootstrapConfig {
                level: options.level,
                seed: options.bootstrap.seed.wrapping_add(trial_seed),
                ..options.bootstrap
            };
            indicators::bootstrap_indicator(slice, target, countries, BootstrapStatistic::Arith, &config)
        }
        Method::TopX => unreachable!(),
    };
    match r {
        Ok(r) => Ok(r.ci.zip(r.mean_ci).map(|(ci, mean_ci)| Draw { mean_ci, ci })),
        Err(IndicatorError::NoArticles(_))
        | Err(IndicatorError::CiUnavailable(_))
        | Err(IndicatorError::DivisionDegenerate(_))
        | Err(IndicatorError::Regression(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Runs `trials` independent corpora with seeds `spec.seed + t` and checks
/// each interval against the ground truth.
pub fn coverage_experiment(
    spec: &SynthSpec,
    trials: usize,
    options: &CoverageOptions,
) -> Result<CoverageReport, SynthError> {
    if trials == 0 {
        return Err(SynthError::InvalidOptions("trials must be at least 1".into()));
    }
    if options.method == Method::TopX {
        return Err(SynthError::InvalidOptions("TOP_X has no analytic ground truth".into()));
    }
    stats::normal_critical(options.level)
        .map_err(|e| SynthError::InvalidOptions(e.to_string()))?;
    let truth = ground_truth(spec)?;
    let target = truth
        .country(&options.target)
        .ok_or_else(|| SynthError::InvalidOptions(format!("{} is not a spec country", options.target)))?;
    let countries = CountrySet::new(options.focal.clone()).map_err(SynthError::Corpus)?;
    if !countries.is_focal(&options.target) {
        return Err(SynthError::InvalidOptions(format!("{} must be focal", options.target)));
    }
    let (true_mean, true_ratio) = match options.method {
        Method::Arith => (target.credited.arithmetic_mean, target.arith_indicator),
        _ => (target.credited.geometric_mean, target.geo_indicator),
    };

    let per_trial: Vec<Vec<Option<Draw>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial_spec = SynthSpec {
                seed: spec.seed.wrapping_add(t as u64),
                ..spec.clone()
            };
            let corpus = generate_corpus(&trial_spec)?;
            corpus
                .slices
                .iter()
                .map(|s| interval_for(s, &countries, options, t as u64))
                .collect()
        })
        .collect::<Result<_, SynthError>>()?;

    let draws: Vec<&Draw> = per_trial.iter().flatten().flatten().collect();
    let intervals = per_trial.iter().map(Vec::len).sum::<usize>();
    let excluded = intervals - draws.len();
    let covered = draws.iter().filter(|d| d.mean_ci.contains(true_mean, 1e-9)).count();
    let ratio_covered = draws.iter().filter(|d| d.ci.contains(true_ratio, 1e-9)).count();
    let widths: Vec<f64> = draws.iter().map(|d| d.mean_ci.width()).collect();
    let indicator_widths: Vec<f64> = draws.iter().map(|d| d.ci.width()).collect();
    let used = draws.len();
    let rate = |k: usize| if used == 0 { f64::NAN } else { k as f64 / used as f64 };
    let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    Ok(CoverageReport {
        method: options.method,
        level: options.level,
        trials,
        intervals,
        covered,
        coverage: rate(covered),
        ratio_covered,
        ratio_coverage: rate(ratio_covered),
        excluded,
        mean_width: mean(&widths),
        median_width: stats::median(&widths).unwrap_or(f64::NAN),
        mean_indicator_width: mean(&indicator_widths),
        median_indicator_width: stats::median(&indicator_widths).unwrap_or(f64::NAN),
    })
}
