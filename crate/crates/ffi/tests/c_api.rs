use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use natimpact_ffi::*;

const TOY: &str = "id,subject,year,citations,affiliations\n\
                   p1,Toy,2012,12,A:1\n\
                   p2,Toy,2012,6,A:1;B:1\n\
                   p3,Toy,2012,0,B:1\n";

struct Fixture {
    corpus: *mut NiCorpus,
    set: *mut NiCountrySet,
}

impl Fixture {
    fn new(csv: &str, countries: &str) -> Self {
        let csv = CString::new(csv).unwrap();
        let list = CString::new(countries).unwrap();
        let mut corpus = ptr::null_mut();
        let mut set = ptr::null_mut();
        unsafe {
            assert_eq!(ni_corpus_parse_str(csv.as_ptr(), &mut corpus), NiStatus::Ok);
            assert_eq!(ni_country_set_parse(list.as_ptr(), &mut set), NiStatus::Ok);
        }
        Fixture { corpus, set }
    }

    fn indicator(&self, country: &str, method: NiMethod, options: Option<&NiOptions>) -> (NiStatus, NiIndicator) {
        let country = CString::new(country).unwrap();
        let mut out = NiIndicator {
            estimate: 0.0,
            has_ci: false,
            ci_low: 0.0,
            ci_high: 0.0,
            n_c: 0.0,
            mean: 0.0,
            mean_ci_low: 0.0,
            mean_ci_high: 0.0,
        };
        let opts = options.map_or(ptr::null(), |o| o as *const NiOptions);
        let status = unsafe { ni_indicator(self.corpus, 0, self.set, country.as_ptr(), method, opts, &mut out) };
        (status, out)
    }
}

impl Drop for Fixture {
    fn drop(&mut self) {
        unsafe {
            ni_corpus_free(self.corpus);
            ni_country_set_free(self.set);
        }
    }
}

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    let n = unsafe { ni_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn toy_arithmetic_and_regression_values() {
    let f = Fixture::new(TOY, "A,B");
    let (s, a) = f.indicator("A", NiMethod::Arith, None);
    assert_eq!(s, NiStatus::Ok);
    assert!((a.mean - 10.0).abs() < 1e-12);
    assert!((a.estimate - 10.0 / 6.0).abs() < 1e-12);
    assert!((a.n_c - 1.5).abs() < 1e-15);
    assert!(a.has_ci);
    let (_, b) = f.indicator("B", NiMethod::Arith, None);
    assert!((b.mean - 2.0).abs() < 1e-12);

    let (s, g) = f.indicator("A", NiMethod::Geo, None);
    assert_eq!(s, NiStatus::Ok);
    assert!((g.mean - 9.576165743612922).abs() < 1e-9);
    assert!(g.ci_low < g.estimate && g.estimate < g.ci_high);
}

#[test]
fn slice_metadata() {
    let f = Fixture::new(TOY, "A");
    let (mut count, mut year, mut articles, mut needed, mut index) = (0usize, 0i32, 0usize, 0usize, 9usize);
    let mut buf = [0 as c_char; 8];
    let toy = CString::new("Toy").unwrap();
    unsafe {
        assert_eq!(ni_corpus_slice_count(f.corpus, &mut count), NiStatus::Ok);
        assert_eq!(ni_corpus_slice_info(f.corpus, 0, &mut year, &mut articles), NiStatus::Ok);
        assert_eq!(ni_corpus_slice_subject(f.corpus, 0, buf.as_mut_ptr(), buf.len(), &mut needed), NiStatus::Ok);
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_str().unwrap(), "Toy");
        assert_eq!(ni_corpus_find_slice(f.corpus, toy.as_ptr(), 2012, &mut index), NiStatus::Ok);
        assert_eq!(ni_corpus_slice_info(f.corpus, 1, &mut year, &mut articles), NiStatus::OutOfRange);
        let mut n = 0usize;
        assert_eq!(ni_country_set_len(f.set, &mut n), NiStatus::Ok);
        assert_eq!(n, 1);
    }
    assert_eq!((count, year, articles, needed, index), (1, 2012, 3, 3, 0));
}

#[test]
fn weighted_count_and_others() {
    let f = Fixture::new(TOY, "A");
    let mut n = 0.0;
    let a = CString::new("A").unwrap();
    let others = CString::new("OTHERS").unwrap();
    let z = CString::new("Z").unwrap();
    unsafe {
        assert_eq!(ni_weighted_count(f.corpus, 0, f.set, a.as_ptr(), &mut n), NiStatus::Ok);
        assert_eq!(n, 1.5);
        assert_eq!(ni_weighted_count(f.corpus, 0, f.set, others.as_ptr(), &mut n), NiStatus::Ok);
        assert_eq!(n, 1.5);
        assert_eq!(ni_weighted_count(f.corpus, 0, f.set, z.as_ptr(), &mut n), NiStatus::InvalidArgument);
    }
    assert!(last_error().contains('Z'));
}

#[test]
fn statuses_for_degenerate_cells() {
    let f = Fixture::new("id,subject,year,citations,affiliations\np1,S,2012,3,A:1\n", "A,B");
    assert_eq!(f.indicator("B", NiMethod::Geo, None).0, NiStatus::NoArticles);
    assert_eq!(f.indicator("A", NiMethod::RegGeo, None).0, NiStatus::InsufficientData);
    let (s, top) = f.indicator("A", NiMethod::TopX, None);
    assert_eq!(s, NiStatus::Ok);
    assert!((top.estimate - 0.1).abs() < 1e-12);
    assert!(top.mean.is_nan());
    let toy = Fixture::new(TOY, "A,B");
    let (s, zero) = toy.indicator("B", NiMethod::TopX, None);
    assert_eq!(s, NiStatus::Ok);
    assert_eq!(zero.estimate, 0.0);
    assert!(!zero.has_ci && zero.ci_low.is_nan());
    let mut bad = ni_options_default();
    bad.level = 1.5;
    assert_eq!(f.indicator("A", NiMethod::Geo, Some(&bad)).0, NiStatus::InvalidArgument);
    assert!(last_error().contains("1.5"));
}

#[test]
fn bootstrap_options_are_honoured() {
    let f = Fixture::new(TOY, "A,B");
    let mut o = ni_options_default();
    o.replicates = 199;
    o.seed = 17;
    o.geo_bootstrap = true;
    let (s1, a) = f.indicator("A", NiMethod::Geo, Some(&o));
    let (s2, b) = f.indicator("A", NiMethod::Geo, Some(&o));
    assert_eq!((s1, s2), (NiStatus::Ok, NiStatus::Ok));
    assert_eq!(a, b);
    let mut analytic = ni_options_default();
    let corrected = f.indicator("A", NiMethod::Geo, Some(&analytic)).1;
    assert_ne!(corrected.ci_low, a.ci_low);
    analytic.ci_mode = NiCiMode::Literal;
    let literal = f.indicator("A", NiMethod::Geo, Some(&analytic)).1;
    assert_ne!(literal.ci_low, corrected.ci_low);
    assert_eq!(literal.estimate, corrected.estimate);
}

#[test]
fn null_and_parse_errors() {
    let mut corpus = ptr::null_mut();
    let bad = CString::new("id,subject,year,citations,affiliations\np1,S,2012,-4,A:1\n").unwrap();
    let missing = CString::new("/nonexistent/corpus.csv").unwrap();
    unsafe {
        assert_eq!(ni_corpus_parse_str(ptr::null(), &mut corpus), NiStatus::NullPointer);
        assert_eq!(ni_corpus_parse_str(bad.as_ptr(), &mut corpus), NiStatus::ParseError);
        assert!(last_error().contains("line 2"));
        assert!(corpus.is_null());
        assert_eq!(ni_corpus_parse_file(missing.as_ptr(), &mut corpus), NiStatus::IoError);
        let mut n = 0usize;
        assert_eq!(ni_corpus_slice_count(ptr::null(), &mut n), NiStatus::NullPointer);
        assert_eq!(ni_last_error_message(ptr::null_mut(), 0), "corpus is null".len());
        ni_corpus_free(ptr::null_mut());
        ni_country_set_free(ptr::null_mut());
    }
}

#[test]
fn success_clears_last_error() {
    let mut n = 0usize;
    unsafe {
        ni_corpus_slice_count(ptr::null(), &mut n);
        assert!(ni_last_error_message(ptr::null_mut(), 0) > 0);
        let f = Fixture::new(TOY, "A");
        assert_eq!(ni_corpus_slice_count(f.corpus, &mut n), NiStatus::Ok);
        assert_eq!(ni_last_error_message(ptr::null_mut(), 0), 0);
    }
}

#[test]
fn means_moments_and_credits() {
    let citations = [12u64, 6, 0];
    let weights = [1.0, 0.5, 0.0];
    let (mut g, mut a) = (0.0, 0.0);
    let mut m = NiMoments {
        n: 0,
        mean: 0.0,
        skewness: 0.0,
        kurtosis: 0.0,
        skewness_acceptable: false,
        kurtosis_acceptable: false,
    };
    let values = [0.0, 0.0, 0.0, 9.0];
    let mut credits = [0.0; 10];
    let tied = [10u64, 10, 10, 5, 5, 5, 5, 5, 5, 5];
    unsafe {
        assert_eq!(ni_arithmetic_mean(citations.as_ptr(), weights.as_ptr(), 3, &mut a), NiStatus::Ok);
        assert_eq!(ni_geometric_mean(citations.as_ptr(), weights.as_ptr(), 3, &mut g), NiStatus::Ok);
        assert_eq!(ni_moments(values.as_ptr(), 4, &mut m), NiStatus::Ok);
        assert_eq!(ni_moments(values.as_ptr(), 1, &mut m), NiStatus::Degenerate);
        assert_eq!(ni_moments(values.as_ptr(), 4, &mut m), NiStatus::Ok);
        assert_eq!(ni_top_credits(tied.as_ptr(), 10, 10.0, credits.as_mut_ptr()), NiStatus::Ok);
        assert_eq!(ni_top_credits(tied.as_ptr(), 10, 100.0, credits.as_mut_ptr()), NiStatus::InvalidArgument);
    }
    assert!((a - 10.0).abs() < 1e-12);
    assert!((g - 9.576165743612922).abs() < 1e-9);
    assert_eq!(m.n, 4);
    assert!((m.skewness - 1.1547005383792515).abs() < 1e-12);
    assert!((m.kurtosis - 2.3333333333333335).abs() < 1e-12);
    assert!(m.skewness_acceptable && m.kurtosis_acceptable);
    assert!(credits[..3].iter().all(|&c| (c - 1.0 / 3.0).abs() < 1e-12));
    assert!(credits[3..].iter().all(|&c| c == 0.0));
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(ni_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include").join("natimpact.h")
}

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "typedef struct NiCorpus NiCorpus;",
        "typedef struct NiCountrySet NiCountrySet;",
        "NI_STATUS_OK = 0",
        "NI_METHOD_TOP_X = 3",
        "ni_corpus_parse_file",
        "ni_corpus_parse_str",
        "ni_corpus_free",
        "ni_country_set_parse",
        "ni_indicator",
        "ni_weighted_count",
        "ni_moments",
        "ni_geometric_mean",
        "ni_arithmetic_mean",
        "ni_top_credits",
        "ni_last_error_message",
        "ni_options_default",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
}

/// Compiles and runs a C program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib_dir = deps.parent().unwrap();
    assert!(
        lib_dir.join("libnatimpact_ffi.a").exists(),
        "static library not found in {}",
        lib_dir.display()
    );
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("toy.c");
    std::fs::write(
        &src,
        r#"
#include <math.h>
#include <stdio.h>
#include "natimpact.h"

int main(void) {
    const char *csv = "id,subject,year,citations,affiliations\n"
                      "p1,Toy,2012,12,A:1\np2,Toy,2012,6,A:1;B:1\np3,Toy,2012,0,B:1\n";
    NiCorpus *corpus = NULL;
    NiCountrySet *set = NULL;
    if (ni_corpus_parse_str(csv, &corpus) != NI_STATUS_OK) return 1;
    if (ni_country_set_parse("A,B", &set) != NI_STATUS_OK) return 2;
    NiOptions opts = ni_options_default();
    opts.replicates = 99;
    NiIndicator out;
    if (ni_indicator(corpus, 0, set, "A", NI_METHOD_ARITH, &opts, &out) != NI_STATUS_OK) return 3;
    if (fabs(out.mean - 10.0) > 1e-12) return 4;
    if (ni_indicator(corpus, 0, set, "Q", NI_METHOD_GEO, &opts, &out) != NI_STATUS_INVALID_ARGUMENT) return 5;
    char msg[128];
    if (ni_last_error_message(msg, sizeof msg) == 0) return 6;
    printf("%.6f %s\n", out.mean, msg);
    ni_country_set_free(set);
    ni_corpus_free(corpus);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("toy");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(lib_dir.join("libnatimpact_ffi.a"))
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("running cc");
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("10.000000"));
}
