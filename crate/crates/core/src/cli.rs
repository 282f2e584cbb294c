//! Command-line driver: `validate`, `compute`, `aggregate`, `diagnose` and
//! `synth`.
//!
//! Settings come from an optional JSON config file with flags layered on
//! top. The effective configuration is echoed as `config.json` next to every
//! set of outputs. Exit status is 0 unless an I/O, parse or config error
//! occurred, or `validate` found invalid rows.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::aggregate::{self, Format, GeoCiSource, Scale, TableParams, TableRow};
use crate::corpus::{self, CountryCode, CountrySet, SubjectYearSlice};
use crate::indicators::{BootstrapConfig, Method};
use crate::stats::{self, CiMode};
use crate::synth::{self, CoverageOptions, SynthSpec};

#[derive(Debug, Parser)]
#[command(name = "natimpact", version, about = "National citation-impact indicators with confidence intervals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a corpus and report every invalid row.
    Validate {
        corpus: Option<PathBuf>,
        #[command(flatten)]
        flags: Flags,
    },
    /// Compute indicator tables for the selected methods.
    Compute {
        corpus: Option<PathBuf>,
        #[command(flatten)]
        flags: Flags,
    },
    /// Median and CI-width series across subjects from table files.
    Aggregate {
        tables: Vec<PathBuf>,
        #[command(flatten)]
        flags: Flags,
    },
    /// Skewness and kurtosis of raw and log-transformed citations.
    Diagnose {
        corpus: Option<PathBuf>,
        #[command(flatten)]
        flags: Flags,
    },
    /// Generate a synthetic corpus from a JSON spec, or run a coverage
    /// experiment with `--coverage`.
    Synth {
        spec: PathBuf,
        #[arg(long)]
        coverage: bool,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[command(flatten)]
        flags: Flags,
    },
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// JSON file with defaults for any of the settings below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Focal countries, e.g. `US,UK`.
    #[arg(long, value_delimiter = ',')]
    pub countries: Option<Vec<String>>,
    /// REG_GEO, GEO, ARITH, TOP_X.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long)]
    pub top_x: Option<f64>,
    #[arg(long)]
    pub level: Option<f64>,
    /// literal or corrected; unset uses each method's default.
    #[arg(long)]
    pub ci_mode: Option<CiMode>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// GEO intervals from the analytic formula or the bootstrap.
    #[arg(long, value_parser = parse_geo_ci)]
    pub geo_ci: Option<GeoCiSource>,
    /// Also report the OTHERS pseudo-country where defined.
    #[arg(long)]
    pub include_others: bool,
    /// Restrict to these subjects.
    #[arg(long, value_delimiter = ',')]
    pub subjects: Option<Vec<String>>,
    /// Restrict to these years.
    #[arg(long, value_delimiter = ',')]
    pub years: Option<Vec<i32>>,
}

fn parse_geo_ci(s: &str) -> Result<GeoCiSource, String> {
    match s {
        "analytic" => Ok(GeoCiSource::Analytic),
        "bootstrap" => Ok(GeoCiSource::Bootstrap),
        other => Err(format!("unknown GEO interval source {other:?} (expected analytic or bootstrap)")),
    }
}

/// Effective settings of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub countries: Vec<String>,
    pub methods: Vec<Method>,
    pub top_x: f64,
    pub level: f64,
    pub ci_mode: Option<CiMode>,
    pub replicates: usize,
    pub seed: u64,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub geo_ci: GeoCiSource,
    pub include_others: bool,
    pub subjects: Vec<String>,
    pub years: Vec<i32>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let boot = BootstrapConfig::default();
        RunConfig {
            inputs: Vec::new(),
            countries: Vec::new(),
            methods: Method::ALL.to_vec(),
            top_x: 10.0,
            level: boot.level,
            ci_mode: None,
            replicates: boot.replicates,
            seed: boot.seed,
            format: Format::Csv,
            out: None,
            geo_ci: GeoCiSource::Analytic,
            include_others: false,
            subjects: Vec::new(),
            years: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn resolve(inputs: Vec<PathBuf>, flags: &Flags) -> Result<Self> {
        let mut c = match &flags.config {
            Some(path) => {
                let file = File::open(path).with_context(|| format!("opening config {}", path.display()))?;
                serde_json::from_reader(BufReader::new(file))
                    .with_context(|| format!("reading config {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if !inputs.is_empty() {
            c.inputs = inputs;
        }
        if let Some(v) = &flags.countries {
            c.countries = v.clone();
        }
        if let Some(v) = &flags.methods {
            c.methods = v.clone();
        }
        c.top_x = flags.top_x.unwrap_or(c.top_x);
        c.level = flags.level.unwrap_or(c.level);
        c.ci_mode = flags.ci_mode.or(c.ci_mode);
        c.replicates = flags.replicates.unwrap_or(c.replicates);
        c.seed = flags.seed.unwrap_or(c.seed);
        c.format = flags.format.unwrap_or(c.format);
        if flags.out.is_some() {
            c.out = flags.out.clone();
        }
        c.geo_ci = flags.geo_ci.unwrap_or(c.geo_ci);
        c.include_others |= flags.include_others;
        if let Some(v) = &flags.subjects {
            c.subjects = v.clone();
        }
        if let Some(v) = &flags.years {
            c.years = v.clone();
        }
        c.check()?;
        Ok(c)
    }

    fn check(&self) -> Result<()> {
        if self.methods.is_empty() {
            bail!("at least one method must be selected");
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            bail!("level {} must lie in (0, 1)", self.level);
        }
        if !(self.top_x > 0.0 && self.top_x < 100.0) {
            bail!("top-x {} must lie in (0, 100)", self.top_x);
        }
        if self.replicates == 0 {
            bail!("replicates must be at least 1");
        }
        Ok(())
    }

    fn country_set(&self) -> Result<CountrySet> {
        if self.countries.is_empty() {
            bail!("no focal countries given (use --countries)");
        }
        let codes = self
            .countries
            .iter()
            .map(|c| CountryCode::new(c))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CountrySet::new(codes)?)
    }

    fn input(&self) -> Result<&Path> {
        match self.inputs.as_slice() {
            [one] => Ok(one),
            [] => bail!("no input file given"),
            _ => bail!("expected one input file, got {}", self.inputs.len()),
        }
    }

    fn out_dir(&self) -> Result<&Path> {
        let out = self.out.as_deref().context("no output directory given (use --out)")?;
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        Ok(out)
    }

    fn selects(&self, slice: &SubjectYearSlice) -> bool {
        (self.subjects.is_empty() || self.subjects.contains(&slice.subject))
            && (self.years.is_empty() || self.years.contains(&slice.year))
    }

    fn table_params(&self) -> TableParams {
        TableParams {
            level: self.level,
            top_x: self.top_x,
            ci_mode: self.ci_mode,
            geo_ci: self.geo_ci,
            bootstrap: BootstrapConfig {
                replicates: self.replicates,
                level: self.level,
                seed: self.seed,
            },
            include_others: self.include_others,
        }
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str], format: Format) -> Result<()> {
    write_atomic(path, |w| Ok(aggregate::write_records(w, rows, header, format)?))
}

fn load_corpus(config: &RunConfig) -> Result<corpus::ParsedCorpus> {
    let path = config.input()?;
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut parsed =
        corpus::parse_corpus(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))?;
    parsed.slices.retain(|s| config.selects(s));
    Ok(parsed)
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { corpus, flags } => cmd_validate(&RunConfig::resolve(corpus.into_iter().collect(), &flags)?),
        Command::Compute { corpus, flags } => cmd_compute(&RunConfig::resolve(corpus.into_iter().collect(), &flags)?),
        Command::Aggregate { tables, flags } => cmd_aggregate(&RunConfig::resolve(tables, &flags)?),
        Command::Diagnose { corpus, flags } => cmd_diagnose(&RunConfig::resolve(corpus.into_iter().collect(), &flags)?),
        Command::Synth {
            spec,
            coverage,
            trials,
            flags,
        } => {
            let config = RunConfig::resolve(vec![spec], &flags)?;
            if coverage {
                cmd_coverage(&config, flags.seed, trials, flags.methods.is_some())
            } else {
                cmd_synth(&config, flags.seed)
            }
        }
    }
}

/// Parses `args` and runs; errors are printed to stderr with exit status 2.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

pub fn cmd_validate(config: &RunConfig) -> Result<ExitCode> {
    let path = config.input()?;
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let report = corpus::validate_corpus(BufReader::new(file));
    if let Some(out) = &config.out {
        std::fs::create_dir_all(out)?;
        write_json(&out.join("validation.json"), &report)?;
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    let d = &report.diagnostics;
    eprintln!(
        "{}: {} rows, {} articles in {} slices, {} dropped without affiliation, {} errors",
        path.display(),
        d.rows_read,
        d.articles,
        d.slices,
        d.dropped_without_affiliation,
        report.errors.len()
    );
    for e in &report.errors {
        eprintln!("  line {}: {}", e.line, e.message);
    }
    Ok(if report.is_valid() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

pub fn cmd_compute(config: &RunConfig) -> Result<ExitCode> {
    let countries = config.country_set()?;
    let parsed = load_corpus(config)?;
    let out = config.out_dir()?;
    let params = config.table_params();
    let mut cells = Vec::new();
    for &method in &config.methods {
        cells.extend(aggregate::indicator_table(&parsed.slices, &countries, method, &params));
    }
    let ext = config.format.extension();
    for (name, scale) in [("indicators", Scale::Indicator), ("means", Scale::Mean)] {
        let rows: Vec<TableRow> = cells.iter().map(|c| c.row(scale)).collect();
        write_atomic(&out.join(format!("{name}.{ext}")), |w| Ok(aggregate::write_table(w, &rows, config.format)?))?;
    }
    write_json(&out.join("config.json"), config)?;
    let mut statuses: BTreeMap<&str, usize> = BTreeMap::new();
    for c in &cells {
        *statuses.entry(c.status.as_str()).or_default() += 1;
    }
    eprintln!("{} cells over {} slices: {statuses:?}", cells.len(), parsed.slices.len());
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_aggregate(config: &RunConfig) -> Result<ExitCode> {
    if config.inputs.is_empty() {
        bail!("no table files given");
    }
    let out = config.out_dir()?;
    let ext = config.format.extension();
    for path in &config.inputs {
        let format = match path.extension().and_then(|e| e.to_str()) {
            Some(e) => e.parse::<Format>().map_err(anyhow::Error::msg)?,
            None => config.format,
        };
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let table = aggregate::read_table(BufReader::new(file), format)
            .with_context(|| format!("reading {}", path.display()))?;
        let (mut medians, mut widths) = (Vec::new(), Vec::new());
        for (method, country) in aggregate::series_keys(&table) {
            if !config.methods.contains(&method) {
                continue;
            }
            if !config.countries.is_empty() && !config.countries.iter().any(|c| c == country.as_str()) {
                continue;
            }
            // a country with no computable cells has no series
            if let Ok(s) = aggregate::median_across_subjects(&table, method, &country) {
                medians.push(s);
            }
            if let Ok(s) = aggregate::ci_width_series(&table, method, &country) {
                widths.push(s);
            }
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table");
        for (suffix, series) in [("medians", &medians), ("ci_widths", &widths)] {
            let rows = aggregate::trend_rows(series);
            write_atomic(&out.join(format!("{stem}_{suffix}.{ext}")), |w| {
                Ok(aggregate::write_trends(w, &rows, config.format)?)
            })?;
        }
    }
    write_json(&out.join("config.json"), config)?;
    Ok(ExitCode::SUCCESS)
}

/// Moment diagnostics of one slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub subject: String,
    pub year: i32,
    pub n: usize,
    pub raw_skewness: Option<f64>,
    pub raw_kurtosis: Option<f64>,
    pub raw_skewness_acceptable: Option<bool>,
    pub raw_kurtosis_acceptable: Option<bool>,
    pub log_skewness: Option<f64>,
    pub log_kurtosis: Option<f64>,
    pub log_skewness_acceptable: Option<bool>,
    pub log_kurtosis_acceptable: Option<bool>,
    pub status: String,
}

pub const MOMENT_HEADER: [&str; 12] = [
    "subject",
    "year",
    "n",
    "raw_skewness",
    "raw_kurtosis",
    "raw_skewness_acceptable",
    "raw_kurtosis_acceptable",
    "log_skewness",
    "log_kurtosis",
    "log_skewness_acceptable",
    "log_kurtosis_acceptable",
    "status",
];

/// Per-year means of the slice moments across subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearMomentRow {
    pub year: i32,
    pub slices: usize,
    pub raw_skewness: f64,
    pub raw_kurtosis: f64,
    pub log_skewness: f64,
    pub log_kurtosis: f64,
}

pub const YEAR_MOMENT_HEADER: [&str; 6] =
    ["year", "slices", "raw_skewness", "raw_kurtosis", "log_skewness", "log_kurtosis"];

pub fn moment_row(slice: &SubjectYearSlice) -> MomentRow {
    let citations = slice.citations();
    let raw: Vec<f64> = citations.iter().map(|&c| c as f64).collect();
    let logs: Vec<f64> = citations.iter().map(|&c| stats::log1p_transform(c)).collect();
    let mut row = MomentRow {
        subject: slice.subject.clone(),
        year: slice.year,
        n: citations.len(),
        raw_skewness: None,
        raw_kurtosis: None,
        raw_skewness_acceptable: None,
        raw_kurtosis_acceptable: None,
        log_skewness: None,
        log_kurtosis: None,
        log_skewness_acceptable: None,
        log_kurtosis_acceptable: None,
        status: "ok".into(),
    };
    match (stats::moments(&raw), stats::moments(&logs)) {
        (Ok(r), Ok(l)) => {
            row.raw_skewness = Some(r.skewness);
            row.raw_kurtosis = Some(r.kurtosis);
            row.raw_skewness_acceptable = Some(r.skewness_acceptable);
            row.raw_kurtosis_acceptable = Some(r.kurtosis_acceptable);
            row.log_skewness = Some(l.skewness);
            row.log_kurtosis = Some(l.kurtosis);
            row.log_skewness_acceptable = Some(l.skewness_acceptable);
            row.log_kurtosis_acceptable = Some(l.kurtosis_acceptable);
        }
        _ => row.status = "degenerate".into(),
    }
    row
}

pub fn year_moments(rows: &[MomentRow]) -> Vec<YearMomentRow> {
    let mut by_year: BTreeMap<i32, Vec<&MomentRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.status == "ok") {
        by_year.entry(r.year).or_default().push(r);
    }
    by_year
        .into_iter()
        .map(|(year, rs)| {
            let mean = |f: fn(&MomentRow) -> Option<f64>| rs.iter().filter_map(|r| f(r)).sum::<f64>() / rs.len() as f64;
            YearMomentRow {
                year,
                slices: rs.len(),
                raw_skewness: mean(|r| r.raw_skewness),
                raw_kurtosis: mean(|r| r.raw_kurtosis),
                log_skewness: mean(|r| r.log_skewness),
                log_kurtosis: mean(|r| r.log_kurtosis),
            }
        })
        .collect()
}

pub fn cmd_diagnose(config: &RunConfig) -> Result<ExitCode> {
    let parsed = load_corpus(config)?;
    let out = config.out_dir()?;
    let ext = config.format.extension();
    let rows: Vec<MomentRow> = parsed.slices.iter().map(moment_row).collect();
    write_rows(&out.join(format!("moments.{ext}")), &rows, &MOMENT_HEADER, config.format)?;
    write_rows(
        &out.join(format!("moments_by_year.{ext}")),
        &year_moments(&rows),
        &YEAR_MOMENT_HEADER,
        config.format,
    )?;
    write_json(&out.join("config.json"), config)?;
    Ok(ExitCode::SUCCESS)
}

/// Reads a spec; `seed` replaces the spec's own seed when given.
fn load_spec(config: &RunConfig, seed: Option<u64>) -> Result<SynthSpec> {
    let path = config.input()?;
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut spec: SynthSpec =
        serde_json::from_reader(BufReader::new(file)).with_context(|| format!("reading spec {}", path.display()))?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    spec.validate()?;
    Ok(spec)
}

pub fn cmd_synth(config: &RunConfig, seed: Option<u64>) -> Result<ExitCode> {
    let spec = load_spec(config, seed)?;
    let out = config.out_dir()?;
    let generated = synth::generate_corpus(&spec)?;
    write_atomic(&out.join("corpus.csv"), |w| Ok(corpus::write_corpus(w, &generated.slices)?))?;
    write_atomic(&out.join("truth.json"), |w| Ok(synth::write_truth(w, &generated.truth)?))?;
    write_json(&out.join("config.json"), config)?;
    eprintln!(
        "{} slices, {} articles",
        generated.slices.len(),
        generated.slices.iter().map(|s| s.len()).sum::<usize>()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_coverage(config: &RunConfig, seed: Option<u64>, trials: usize, methods_given: bool) -> Result<ExitCode> {
    let spec = load_spec(config, seed)?;
    let focal: Vec<CountryCode> = if config.countries.is_empty() {
        vec![spec.countries[0].code.clone()]
    } else {
        config.country_set()?.focal().to_vec()
    };
    let methods = if methods_given { config.methods.clone() } else { vec![Method::Geo] };
    let mut reports = Vec::new();
    for method in methods {
        let options = CoverageOptions {
            method,
            level: config.level,
            ci_mode: config.ci_mode,
            bootstrap: BootstrapConfig {
                replicates: config.replicates,
                level: config.level,
                seed: config.seed,
            },
            focal: focal.clone(),
            target: focal[0].clone(),
        };
        let r = synth::coverage_experiment(&spec, trials, &options)?;
        println!(
            "{}: coverage {:.4} ({}/{}), excluded {}, median width {:.6}",
            r.method,
            r.coverage,
            r.covered,
            r.intervals - r.excluded,
            r.excluded,
            r.median_width
        );
        reports.push(r);
    }
    if let Some(out) = &config.out {
        std::fs::create_dir_all(out)?;
        write_json(&out.join("coverage.json"), &reports)?;
        write_json(&out.join("config.json"), config)?;
    }
    Ok(ExitCode::SUCCESS)
}
