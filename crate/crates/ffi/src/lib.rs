//! C ABI over the natimpact library.
//!
//! Corpora and country sets are opaque handles created by `ni_*_parse*` and
//! released with the matching `ni_*_free`. Every fallible call returns an
//! [`NiStatus`]; on failure a message is kept per thread and can be read
//! with [`ni_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use natimpact::aggregate::{self, GeoCiSource, TableParams};
use natimpact::corpus::{self, CountryCode, CountrySet, SubjectYearSlice};
use natimpact::indicators::{self, BootstrapConfig, IndicatorError, Method};
use natimpact::regression::RegressionError;
use natimpact::stats::{self, CiMode, StatsError};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    IoError = 4,
    OutOfRange = 5,
    NoArticles = 6,
    Degenerate = 7,
    NotIdentified = 8,
    InsufficientData = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiMethod {
    RegGeo = 0,
    Geo = 1,
    Arith = 2,
    TopX = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiCiMode {
    /// Literal for REG_GEO, corrected for GEO.
    Default = 0,
    Literal = 1,
    Corrected = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NiOptions {
    pub level: f64,
    pub top_x: f64,
    pub ci_mode: NiCiMode,
    /// GEO intervals from the bootstrap instead of the analytic formula.
    pub geo_bootstrap: bool,
    pub replicates: usize,
    pub seed: u64,
}

/// An indicator and its intervals. Interval fields are NaN when `has_ci`
/// is false; `mean` is NaN for TOP_X.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NiIndicator {
    pub estimate: f64,
    pub has_ci: bool,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_c: f64,
    pub mean: f64,
    pub mean_ci_low: f64,
    pub mean_ci_high: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NiMoments {
    pub n: usize,
    pub mean: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub skewness_acceptable: bool,
    pub kurtosis_acceptable: bool,
}

/// Parsed corpus: subject/year slices ordered by subject then year.
pub struct NiCorpus {
    slices: Vec<SubjectYearSlice>,
}

/// Focal country list.
pub struct NiCountrySet {
    set: CountrySet,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(NiStatus, String);

type Outcome = Result<(), Failure>;

fn fail(status: NiStatus, message: impl Into<String>) -> Failure {
    Failure(status, message.into())
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Outcome) -> NiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            NiStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            NiStatus::Panic
        }
    }
}

fn from_indicator_error(e: IndicatorError) -> Failure {
    let status = match &e {
        IndicatorError::NoArticles(_) => NiStatus::NoArticles,
        IndicatorError::DivisionDegenerate(_) | IndicatorError::Regression(RegressionError::DivisionDegenerate(_)) => {
            NiStatus::Degenerate
        }
        IndicatorError::Regression(RegressionError::NotIdentified(_)) => NiStatus::NotIdentified,
        IndicatorError::Regression(RegressionError::InsufficientData { .. }) => NiStatus::InsufficientData,
        IndicatorError::Stats(StatsError::Degenerate(_)) => NiStatus::Degenerate,
        _ => NiStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn from_stats_error(e: StatsError) -> Failure {
    let status = match e {
        StatsError::Degenerate(_) | StatsError::EmptySample => NiStatus::Degenerate,
        _ => NiStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(NiStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(NiStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(NiStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(NiStatus::NullPointer, format!("{name} is null")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(NiStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn slice_at(corpus: &NiCorpus, index: usize) -> Result<&SubjectYearSlice, Failure> {
    corpus.slices.get(index).ok_or_else(|| {
        fail(
            NiStatus::OutOfRange,
            format!("slice {index} out of range ({} slices)", corpus.slices.len()),
        )
    })
}

fn country_arg(code: &str) -> Result<CountryCode, Failure> {
    CountryCode::new(code).map_err(|e| fail(NiStatus::InvalidArgument, e.to_string()))
}

fn parse_into(text: impl std::io::Read, out: &mut *mut NiCorpus) -> Outcome {
    let parsed = corpus::parse_corpus(text).map_err(|e| fail(NiStatus::ParseError, e.to_string()))?;
    *out = Box::into_raw(Box::new(NiCorpus { slices: parsed.slices }));
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`) and returns its full length in
/// bytes, or 0 if the last call succeeded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ni_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ni_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a corpus CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ni_corpus_parse_file(path: *const c_char, out: *mut *mut NiCorpus) -> NiStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let file = File::open(path).map_err(|e| fail(NiStatus::IoError, format!("{path}: {e}")))?;
        parse_into(BufReader::new(file), out)
    })
}

/// Parses corpus CSV text.
///
/// # Safety
/// `csv` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ni_corpus_parse_str(csv: *const c_char, out: *mut *mut NiCorpus) -> NiStatus {
    guard(|| {
        let text = str_arg(csv, "csv")?;
        let out = out_arg(out, "out")?;
        parse_into(text.as_bytes(), out)
    })
}

/// # Safety
/// `corpus` must be null or a handle from `ni_corpus_parse_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ni_corpus_free(corpus: *mut NiCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// # Safety
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ni_corpus_slice_count(corpus: *const NiCorpus, out: *mut usize) -> NiStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(corpus, "corpus")?.slices.len();
        Ok(())
    })
}

/// Year and article count of slice `index`.
///
/// # Safety
/// `corpus` must be a live handle; `year` and `articles` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ni_corpus_slice_info(
    corpus: *const NiCorpus,
    index: usize,
    year: *mut i32,
    articles: *mut usize,
) -> NiStatus {
    guard(|| {
        let slice = slice_at(ref_arg(corpus, "corpus")?, index)?;
        *out_arg(year, "year")? = slice.year;
        *out_arg(articles, "articles")? = slice.len();
        Ok(())
    })
}

/// Copies the subject label of slice `index` into `buf` like
/// [`ni_last_error_message`] and stores its full length in `needed`.
///
/// # Safety
/// `corpus` must be a live handle; `buf` must be null or hold `len` bytes;
/// `needed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ni_corpus_slice_subject(
    corpus: *const NiCorpus,
    index: usize,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> NiStatus {
    guard(|| {
        let slice = slice_at(ref_arg(corpus, "corpus")?, index)?;
        let bytes = slice.subject.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        *out_arg(needed, "needed")? = bytes.len();
        Ok(())
    })
}

/// Index of the slice for (`subject`, `year`).
///
/// # Safety
/// `corpus` must be a live handle; `subject` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ni_corpus_find_slice(
    corpus: *const NiCorpus,
    subject: *const c_char,
    year: i32,
    out: *mut usize,
) -> NiStatus {
    guard(|| {
        let corpus = ref_arg(corpus, "corpus")?;
        let subject = str_arg(subject, "subject")?;
        let index = corpus
            .slices
            .iter()
            .position(|s| s.subject == subject && s.year == year)
            .ok_or_else(|| fail(NiStatus::OutOfRange, format!("no slice ({subject}, {year})")))?;
        *out_arg(out, "out")? = index;
        Ok(())
    })
}

/// Parses a comma-separated focal list such as `"US,UK"`.
///
/// # Safety
/// `list` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ni_country_set_parse(list: *const c_char, out: *mut *mut NiCountrySet) -> NiStatus {
    guard(|| {
        let list = str_arg(list, "list")?;
        let out = out_arg(out, "out")?;
        let set = CountrySet::parse(list).map_err(|e| fail(NiStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(NiCountrySet { set }));
        Ok(())
    })
}

/// # Safety
/// `set` must be null or a handle from `ni_country_set_parse` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ni_country_set_free(set: *mut NiCountrySet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// # Safety
/// `set` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ni_country_set_len(set: *const NiCountrySet, out: *mut usize) -> NiStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(set, "set")?.set.focal().len();
        Ok(())
    })
}

/// Defaults: level 0.95, X = 10, per-method CI mode, analytic GEO
/// intervals, 999 bootstrap replicates, seed 0.
#[no_mangle]
pub extern "C" fn ni_options_default() -> NiOptions {
    let boot = BootstrapConfig::default();
    NiOptions {
        level: boot.level,
        top_x: 10.0,
        ci_mode: NiCiMode::Default,
        geo_bootstrap: false,
        replicates: boot.replicates,
        seed: boot.seed,
    }
}

fn table_params(o: &NiOptions) -> TableParams {
    TableParams {
        level: o.level,
        top_x: o.top_x,
        ci_mode: match o.ci_mode {
            NiCiMode::Default => None,
            NiCiMode::Literal => Some(CiMode::Literal),
            NiCiMode::Corrected => Some(CiMode::Corrected),
        },
        geo_ci: if o.geo_bootstrap { GeoCiSource::Bootstrap } else { GeoCiSource::Analytic },
        bootstrap: BootstrapConfig {
            replicates: o.replicates,
            level: o.level,
            seed: o.seed,
        },
        include_others: false,
    }
}

/// One indicator for `country` in slice `index`. `options` may be null for
/// the defaults. An unavailable interval is not an error: `has_ci` is false.
///
/// # Safety
/// Handles must be live; `country` NUL-terminated; `options` null or valid;
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ni_indicator(
    corpus: *const NiCorpus,
    index: usize,
    countries: *const NiCountrySet,
    country: *const c_char,
    method: NiMethod,
    options: *const NiOptions,
    out: *mut NiIndicator,
) -> NiStatus {
    guard(|| {
        let slice = slice_at(ref_arg(corpus, "corpus")?, index)?;
        let set = &ref_arg(countries, "countries")?.set;
        let country = country_arg(str_arg(country, "country")?)?;
        let options = if options.is_null() { ni_options_default() } else { *options };
        let out = out_arg(out, "out")?;
        if !(options.level > 0.0 && options.level < 1.0) {
            return Err(fail(NiStatus::InvalidArgument, format!("level {} must lie in (0, 1)", options.level)));
        }
        let method = match method {
            NiMethod::RegGeo => Method::RegGeo,
            NiMethod::Geo => Method::Geo,
            NiMethod::Arith => Method::Arith,
            NiMethod::TopX => Method::TopX,
        };
        let r = aggregate::compute_indicator(slice, &country, set, method, &table_params(&options))
            .map_err(from_indicator_error)?;
        let nan = f64::NAN;
        *out = NiIndicator {
            estimate: r.estimate,
            has_ci: r.ci.is_some(),
            ci_low: r.ci.map_or(nan, |c| c.low),
            ci_high: r.ci.map_or(nan, |c| c.high),
            n_c: r.n_c,
            mean: r.mean.unwrap_or(nan),
            mean_ci_low: r.mean_ci.map_or(nan, |c| c.low),
            mean_ci_high: r.mean_ci.map_or(nan, |c| c.high),
        };
        Ok(())
    })
}

/// Fractional article count `n_c` of `country` in slice `index`.
///
/// # Safety
/// Handles must be live; `country` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ni_weighted_count(
    corpus: *const NiCorpus,
    index: usize,
    countries: *const NiCountrySet,
    country: *const c_char,
    out: *mut f64,
) -> NiStatus {
    guard(|| {
        let slice = slice_at(ref_arg(corpus, "corpus")?, index)?;
        let set = &ref_arg(countries, "countries")?.set;
        let country = country_arg(str_arg(country, "country")?)?;
        *out_arg(out, "out")? = corpus::weighted_count(slice, &country, set)
            .map_err(|e| fail(NiStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Skewness and non-excess kurtosis of `len` values.
///
/// # Safety
/// `values` must point to `len` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ni_moments(values: *const f64, len: usize, out: *mut NiMoments) -> NiStatus {
    guard(|| {
        let values = slice_arg(values, len, "values")?;
        let m = stats::moments(values).map_err(from_stats_error)?;
        *out_arg(out, "out")? = NiMoments {
            n: m.n,
            mean: m.mean,
            skewness: m.skewness,
            kurtosis: m.kurtosis,
            skewness_acceptable: m.skewness_acceptable,
            kurtosis_acceptable: m.kurtosis_acceptable,
        };
        Ok(())
    })
}

/// Weighted geometric mean `exp(Σ w ln(1+c) / Σ w) − 1`.
///
/// # Safety
/// `citations` and `weights` must each point to `len` elements; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ni_geometric_mean(
    citations: *const u64,
    weights: *const f64,
    len: usize,
    out: *mut f64,
) -> NiStatus {
    guard(|| {
        let c = slice_arg(citations, len, "citations")?;
        let w = slice_arg(weights, len, "weights")?;
        *out_arg(out, "out")? = stats::geometric_mean(c, w).map_err(from_stats_error)?;
        Ok(())
    })
}

/// Weighted arithmetic mean `Σ w c / Σ w`.
///
/// # Safety
/// `citations` and `weights` must each point to `len` elements; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ni_arithmetic_mean(
    citations: *const u64,
    weights: *const f64,
    len: usize,
    out: *mut f64,
) -> NiStatus {
    guard(|| {
        let c = slice_arg(citations, len, "citations")?;
        let w = slice_arg(weights, len, "weights")?;
        *out_arg(out, "out")? = stats::arithmetic_mean(c, w).map_err(from_stats_error)?;
        Ok(())
    })
}

/// Top-X% credit of each article, with threshold ties split fractionally.
///
/// # Safety
/// `citations` must point to `len` elements and `credits` to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn ni_top_credits(citations: *const u64, len: usize, x: f64, credits: *mut f64) -> NiStatus {
    guard(|| {
        let c = slice_arg(citations, len, "citations")?;
        let values = indicators::top_credits(c, x).map_err(from_indicator_error)?;
        if len > 0 {
            if credits.is_null() {
                return Err(fail(NiStatus::NullPointer, "credits is null"));
            }
            ptr::copy_nonoverlapping(values.as_ptr(), credits, len);
        }
        Ok(())
    })
}
