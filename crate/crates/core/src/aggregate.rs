//! Batch indicator tables over a corpus and their per-year medians across
//! subjects.
//!
//! A table holds one cell per (slice, country) for a method. Cells that
//! cannot be computed are kept with a status instead of failing the batch.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CountryCode, CountrySet, SubjectYearSlice};
use crate::indicators::{
    self, BootstrapConfig, BootstrapStatistic, IndicatorError, IndicatorResult, Method, RegGeoModel,
};
use crate::regression::RegressionError;
use crate::stats::{self, CiMode};

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("no computable {method} cells for country {country}")]
    EmptySeries { method: Method, country: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    CiUnavailable,
    NoArticles,
    NotIdentified,
    InsufficientData,
    Degenerate,
    Invalid,
}

impl CellStatus {
    pub fn has_estimate(&self) -> bool {
        matches!(self, CellStatus::Ok | CellStatus::CiUnavailable)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::CiUnavailable => "ci_unavailable",
            CellStatus::NoArticles => "no_articles",
            CellStatus::NotIdentified => "not_identified",
            CellStatus::InsufficientData => "insufficient_data",
            CellStatus::Degenerate => "degenerate",
            CellStatus::Invalid => "invalid",
        }
    }

    fn from_error(e: &IndicatorError) -> Self {
        match e {
            IndicatorError::NoArticles(_) => CellStatus::NoArticles,
            IndicatorError::DivisionDegenerate(_)
            | IndicatorError::Regression(RegressionError::DivisionDegenerate(_)) => CellStatus::Degenerate,
            IndicatorError::Regression(RegressionError::NotIdentified(_)) => CellStatus::NotIdentified,
            IndicatorError::Regression(RegressionError::InsufficientData { .. }) => {
                CellStatus::InsufficientData
            }
            IndicatorError::CiUnavailable(_) => CellStatus::CiUnavailable,
            _ => CellStatus::Invalid,
        }
    }
}

/// Where GEO intervals come from. ARITH intervals always come from the
/// bootstrap, REG_GEO from the regression, TOP_X from the proportion formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeoCiSource {
    Analytic,
    Bootstrap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableParams {
    pub level: f64,
    pub top_x: f64,
    /// `None` picks each method's default: literal for REG_GEO,
    /// corrected for GEO.
    pub ci_mode: Option<CiMode>,
    pub geo_ci: GeoCiSource,
    pub bootstrap: BootstrapConfig,
    pub include_others: bool,
}

impl Default for TableParams {
    fn default() -> Self {
        TableParams {
            level: 0.95,
            top_x: 10.0,
            ci_mode: None,
            geo_ci: GeoCiSource::Analytic,
            bootstrap: BootstrapConfig::default(),
            include_others: false,
        }
    }
}

/// One computed (slice, country) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TableCell {
    pub subject: String,
    pub year: i32,
    pub country: CountryCode,
    pub method: Method,
    pub status: CellStatus,
    pub result: Option<IndicatorResult>,
    pub reason: Option<String>,
}

/// Flat record of the table file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub subject: String,
    pub year: i32,
    pub country: CountryCode,
    pub method: Method,
    pub estimate: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub n_c: Option<f64>,
    pub status: CellStatus,
}

impl TableRow {
    pub fn ci_width(&self) -> Option<f64> {
        Some(self.ci_high? - self.ci_low?)
    }
}

/// Normalised indicators, or the country means before normalisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Indicator,
    Mean,
}

impl TableCell {
    pub fn row(&self, scale: Scale) -> TableRow {
        let (estimate, ci, n_c) = match &self.result {
            None => (None, None, None),
            Some(r) => match scale {
                Scale::Indicator => (Some(r.estimate), r.ci, Some(r.n_c)),
                // TOP_X is already a proportion
                Scale::Mean if r.method == Method::TopX => (Some(r.estimate), r.ci, Some(r.n_c)),
                Scale::Mean => (r.mean, r.mean_ci, Some(r.n_c)),
            },
        };
        TableRow {
            subject: self.subject.clone(),
            year: self.year,
            country: self.country.clone(),
            method: self.method,
            estimate,
            ci_low: ci.map(|c| c.low),
            ci_high: ci.map(|c| c.high),
            n_c,
            status: self.status,
        }
    }
}

fn cell_for(
    slice: &SubjectYearSlice,
    country: &CountryCode,
    method: Method,
    outcome: Result<IndicatorResult, IndicatorError>,
) -> TableCell {
    let (status, result, reason) = match outcome {
        Ok(r) => {
            let status = if r.ci.is_some() { CellStatus::Ok } else { CellStatus::CiUnavailable };
            let reason = r.warnings.iter().find(|w| w.starts_with("ci unavailable")).cloned();
            (status, Some(r), reason)
        }
        Err(e) => (CellStatus::from_error(&e), None, Some(e.to_string())),
    };
    TableCell {
        subject: slice.subject.clone(),
        year: slice.year,
        country: country.clone(),
        method,
        status,
        result,
        reason,
    }
}

/// One indicator with its interval, as a table cell would compute it.
pub fn compute_indicator(
    slice: &SubjectYearSlice,
    country: &CountryCode,
    countries: &CountrySet,
    method: Method,
    params: &TableParams,
) -> Result<IndicatorResult, IndicatorError> {
    let boot = BootstrapConfig {
        level: params.level,
        ..params.bootstrap
    };
    match method {
        Method::RegGeo => RegGeoModel::fit(slice, countries)?.indicator(
            slice,
            country,
            countries,
            Some((params.level, params.ci_mode.unwrap_or(CiMode::Literal))),
        ),
        Method::Geo => match params.geo_ci {
            GeoCiSource::Analytic => indicators::geo_indicator_with_ci(
                slice,
                country,
                countries,
                params.level,
                params.ci_mode.unwrap_or(CiMode::Corrected),
            ),
            GeoCiSource::Bootstrap => {
                indicators::bootstrap_indicator(slice, country, countries, BootstrapStatistic::Geo, &boot)
            }
        },
        Method::Arith => indicators::bootstrap_indicator(slice, country, countries, BootstrapStatistic::Arith, &boot),
        Method::TopX => indicators::top_share_with_ci(slice, country, countries, params.top_x, params.level),
    }
}

fn slice_cells(
    slice: &SubjectYearSlice,
    countries: &CountrySet,
    method: Method,
    params: &TableParams,
) -> Vec<TableCell> {
    let mut targets = countries.focal().to_vec();
    if params.include_others && method != Method::RegGeo {
        targets.push(CountryCode::others());
    }
    if method == Method::RegGeo {
        // one fit serves every country
        let mode = params.ci_mode.unwrap_or(CiMode::Literal);
        let model = RegGeoModel::fit(slice, countries);
        return targets
            .iter()
            .map(|c| {
                let outcome = match &model {
                    Ok(m) => m.indicator(slice, c, countries, Some((params.level, mode))),
                    Err(e) => Err(e.clone()),
                };
                cell_for(slice, c, method, outcome)
            })
            .collect();
    }
    targets
        .iter()
        .map(|c| cell_for(slice, c, method, compute_indicator(slice, c, countries, method, params)))
        .collect()
}

/// One cell per (slice, focal country), in corpus then country order.
/// Slices are processed in parallel; output order and values are fixed.
pub fn indicator_table(
    corpus: &[SubjectYearSlice],
    countries: &CountrySet,
    method: Method,
    params: &TableParams,
) -> Vec<TableCell> {
    corpus
        .par_iter()
        .map(|slice| slice_cells(slice, countries, method, params))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub year: i32,
    pub median_estimate: f64,
    /// Subjects contributing to this point.
    pub subjects: usize,
    pub median_ci_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSeries {
    pub method: Method,
    pub country: CountryCode,
    pub points: Vec<TrendPoint>,
}

fn series(
    table: &[TableRow],
    method: Method,
    country: &CountryCode,
    keep: impl Fn(&TableRow) -> bool,
) -> Result<TrendSeries, AggregateError> {
    let mut by_year: BTreeMap<i32, Vec<&TableRow>> = BTreeMap::new();
    for row in table {
        if row.method == method && &row.country == country && row.estimate.is_some() && keep(row) {
            by_year.entry(row.year).or_default().push(row);
        }
    }
    if by_year.is_empty() {
        return Err(AggregateError::EmptySeries {
            method,
            country: country.to_string(),
        });
    }
    let points = by_year
        .into_iter()
        .map(|(year, rows)| {
            let estimates: Vec<f64> = rows.iter().filter_map(|r| r.estimate).collect();
            let widths: Vec<f64> = rows.iter().filter_map(|r| r.ci_width()).collect();
            TrendPoint {
                year,
                median_estimate: stats::median(&estimates).expect("non-empty"),
                subjects: rows.len(),
                median_ci_width: stats::median(&widths),
            }
        })
        .collect();
    Ok(TrendSeries {
        method,
        country: country.clone(),
        points,
    })
}

/// Per-year median of the present estimates across subjects.
pub fn median_across_subjects(
    table: &[TableRow],
    method: Method,
    country: &CountryCode,
) -> Result<TrendSeries, AggregateError> {
    series(table, method, country, |_| true)
}

/// Per-year median CI width, over the cells that have an interval.
pub fn ci_width_series(
    table: &[TableRow],
    method: Method,
    country: &CountryCode,
) -> Result<TrendSeries, AggregateError> {
    series(table, method, country, |r| r.ci_width().is_some())
}

/// Every (method, country) pair present in `table`, in first-seen order.
pub fn series_keys(table: &[TableRow]) -> Vec<(Method, CountryCode)> {
    let mut keys: Vec<(Method, CountryCode)> = Vec::new();
    for row in table {
        let key = (row.method, row.country.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?} (expected csv or json)")),
        }
    }
}

pub const TABLE_HEADER: [&str; 9] =
    ["subject", "year", "country", "method", "estimate", "ci_low", "ci_high", "n_c", "status"];

pub const TREND_HEADER: [&str; 6] = ["method", "country", "year", "median_estimate", "subjects", "median_ci_width"];

/// Writes flat records as CSV (header always present) or a JSON array.
pub fn write_records<W: Write, T: Serialize>(
    sink: W,
    rows: &[T],
    header: &[&str],
    format: Format,
) -> Result<(), AggregateError> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
            w.write_record(header)?;
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut sink = sink;
            serde_json::to_writer_pretty(&mut sink, rows)?;
            sink.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn write_table<W: Write>(sink: W, rows: &[TableRow], format: Format) -> Result<(), AggregateError> {
    write_records(sink, rows, &TABLE_HEADER, format)
}

pub fn read_table<R: Read>(source: R, format: Format) -> Result<Vec<TableRow>, AggregateError> {
    match format {
        Format::Csv => csv::Reader::from_reader(source)
            .deserialize()
            .collect::<Result<Vec<TableRow>, _>>()
            .map_err(Into::into),
        Format::Json => Ok(serde_json::from_reader(source)?),
    }
}

/// Flat record of the trend file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub method: Method,
    pub country: CountryCode,
    pub year: i32,
    pub median_estimate: f64,
    pub subjects: usize,
    pub median_ci_width: Option<f64>,
}

pub fn trend_rows(series: &[TrendSeries]) -> Vec<TrendRow> {
    series
        .iter()
        .flat_map(|s| {
            s.points.iter().map(|p| TrendRow {
                method: s.method,
                country: s.country.clone(),
                year: p.year,
                median_estimate: p.median_estimate,
                subjects: p.subjects,
                median_ci_width: p.median_ci_width,
            })
        })
        .collect()
}

pub fn write_trends<W: Write>(sink: W, rows: &[TrendRow], format: Format) -> Result<(), AggregateError> {
    write_records(sink, rows, &TREND_HEADER, format)
}
