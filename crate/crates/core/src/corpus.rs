//! Article corpora: CSV ingestion, validation, subject/year slicing and
//! fractional country shares.
//!
//! Each article carries integer author counts per country. A country's share
//! `p_c` of an article is its author count divided by the article's author
//! total, so the shares of one article always sum to one. Countries outside
//! the caller's focal set are folded into the [`OTHERS`] pseudo-country.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Label of the remainder pseudo-country.
pub const OTHERS: &str = "OTHERS";

/// Header row of the corpus CSV format.
pub const CORPUS_HEADER: [&str; 5] = ["id", "subject", "year", "citations", "affiliations"];

const SHARE_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("duplicate article id {id:?} in slice ({subject}, {year}) at line {line}")]
    DuplicateId {
        id: String,
        subject: String,
        year: i32,
        line: u64,
    },
    #[error("invalid country code {0:?}")]
    InvalidCountry(String),
    #[error("invalid country set: {0}")]
    InvalidCountrySet(String),
    #[error("invalid article {id:?}: {message}")]
    InvalidArticle { id: String, message: String },
    #[error("unknown article id {0:?}")]
    UnknownArticle(String),
    #[error("country {0} is neither focal nor {OTHERS}")]
    UnknownCountry(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for CorpusError {
    fn from(e: std::io::Error) -> Self {
        CorpusError::Io(e.to_string())
    }
}

/// Uppercase alphanumeric country token, e.g. `US` or `UK`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CountryCode(String);

impl CountryCode {
    /// Uppercases `raw` and checks it is a non-empty alphanumeric token.
    pub fn new(raw: &str) -> Result<Self, CorpusError> {
        let code = raw.trim().to_ascii_uppercase();
        if code.is_empty() || !code.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(CorpusError::InvalidCountry(raw.to_string()));
        }
        Ok(CountryCode(code))
    }

    pub fn others() -> Self {
        CountryCode(OTHERS.to_string())
    }

    pub fn is_others(&self) -> bool {
        self.0 == OTHERS
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for CountryCode {
    type Error = CorpusError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        CountryCode::new(&value)
    }
}

impl From<CountryCode> for String {
    fn from(value: CountryCode) -> Self {
        value.0
    }
}

impl std::str::FromStr for CountryCode {
    type Err = CorpusError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CountryCode::new(s)
    }
}

/// One publication.
#[derive(Debug, Clone, PartialEq)]
pub struct ArticleRecord {
    id: String,
    subject: String,
    year: i32,
    citations: u64,
    authors: BTreeMap<CountryCode, u32>,
    shares: BTreeMap<CountryCode, f64>,
}

impl ArticleRecord {
    /// Builds an article from per-country author counts. Counts for the same
    /// country are expected to be merged by the caller.
    pub fn new(
        id: impl Into<String>,
        subject: impl Into<String>,
        year: i32,
        citations: u64,
        authors: BTreeMap<CountryCode, u32>,
    ) -> Result<Self, CorpusError> {
        let id = id.into();
        if authors.is_empty() {
            return Err(CorpusError::InvalidArticle {
                id,
                message: "no author affiliations".into(),
            });
        }
        if let Some((code, _)) = authors.iter().find(|(_, &n)| n == 0) {
            return Err(CorpusError::InvalidArticle {
                id,
                message: format!("zero author count for {code}"),
            });
        }
        let total: u64 = authors.values().map(|&n| u64::from(n)).sum();
        let shares = authors
            .iter()
            .map(|(c, &n)| (c.clone(), f64::from(n) / total as f64))
            .collect();
        Ok(ArticleRecord {
            id,
            subject: subject.into(),
            year,
            citations,
            authors,
            shares,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn subject(&self) -> &str {
        &self.subject
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn citations(&self) -> u64 {
        self.citations
    }

    pub fn authors(&self) -> &BTreeMap<CountryCode, u32> {
        &self.authors
    }

    /// Fractional author share per listed country; sums to one.
    pub fn shares(&self) -> &BTreeMap<CountryCode, f64> {
        &self.shares
    }

    /// Share of `country` under `countries`: the listed share for a focal
    /// country, the summed non-focal mass for [`OTHERS`].
    pub fn share_of(&self, country: &CountryCode, countries: &CountrySet) -> f64 {
        if country.is_others() {
            self.shares
                .iter()
                .filter(|(c, _)| !countries.is_focal(c))
                .map(|(_, s)| s)
                .sum()
        } else {
            self.shares.get(country).copied().unwrap_or(0.0)
        }
    }

    fn affiliation_field(&self) -> String {
        self.authors
            .iter()
            .map(|(c, n)| format!("{c}:{n}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// All articles of one (subject, year).
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectYearSlice {
    pub subject: String,
    pub year: i32,
    pub articles: Vec<ArticleRecord>,
}

impl SubjectYearSlice {
    pub fn new(subject: impl Into<String>, year: i32) -> Self {
        SubjectYearSlice {
            subject: subject.into(),
            year,
            articles: Vec::new(),
        }
    }

    /// Appends an article, rejecting mismatched labels and duplicate ids.
    pub fn push(&mut self, article: ArticleRecord) -> Result<(), CorpusError> {
        if article.subject != self.subject || article.year != self.year {
            return Err(CorpusError::InvalidArticle {
                id: article.id,
                message: format!(
                    "belongs to ({}, {}), not ({}, {})",
                    article.subject, article.year, self.subject, self.year
                ),
            });
        }
        if self.articles.iter().any(|a| a.id == article.id) {
            return Err(CorpusError::DuplicateId {
                id: article.id,
                subject: self.subject.clone(),
                year: self.year,
                line: 0,
            });
        }
        self.articles.push(article);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn article(&self, id: &str) -> Option<&ArticleRecord> {
        self.articles.iter().find(|a| a.id == id)
    }

    pub fn citations(&self) -> Vec<u64> {
        self.articles.iter().map(|a| a.citations).collect()
    }

    /// Share column of `country` over the slice's articles, in article order.
    pub fn share_column(
        &self,
        country: &CountryCode,
        countries: &CountrySet,
    ) -> Result<Vec<f64>, CorpusError> {
        countries.check_member(country)?;
        Ok(self
            .articles
            .iter()
            .map(|a| a.share_of(country, countries))
            .collect())
    }
}

/// Focal countries of an analysis; everything else is [`OTHERS`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountrySet {
    focal: Vec<CountryCode>,
}

impl CountrySet {
    pub fn new(focal: Vec<CountryCode>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for code in &focal {
            if code.is_others() {
                return Err(CorpusError::InvalidCountrySet(format!(
                    "{OTHERS} cannot be a focal country"
                )));
            }
            if !seen.insert(code) {
                return Err(CorpusError::InvalidCountrySet(format!(
                    "duplicate focal country {code}"
                )));
            }
        }
        Ok(CountrySet { focal })
    }

    /// Parses a comma-separated list such as `US,UK,DE`.
    pub fn parse(list: &str) -> Result<Self, CorpusError> {
        let codes = list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(CountryCode::new)
            .collect::<Result<Vec<_>, _>>()?;
        CountrySet::new(codes)
    }

    pub fn focal(&self) -> &[CountryCode] {
        &self.focal
    }

    pub fn is_focal(&self, code: &CountryCode) -> bool {
        self.focal.contains(code)
    }

    /// Focal countries followed by [`OTHERS`].
    pub fn with_others(&self) -> Vec<CountryCode> {
        let mut all = self.focal.clone();
        all.push(CountryCode::others());
        all
    }

    pub fn check_member(&self, code: &CountryCode) -> Result<(), CorpusError> {
        if code.is_others() || self.is_focal(code) {
            Ok(())
        } else {
            Err(CorpusError::UnknownCountry(code.to_string()))
        }
    }
}

/// Shares of one article over focal countries then [`OTHERS`].
#[derive(Debug, Clone, PartialEq)]
pub struct ShareVector(pub Vec<(CountryCode, f64)>);

impl ShareVector {
    pub fn get(&self, code: &str) -> Option<f64> {
        self.0.iter().find(|(c, _)| c.as_str() == code).map(|(_, s)| *s)
    }

    pub fn total(&self) -> f64 {
        self.0.iter().map(|(_, s)| s).sum()
    }
}

pub fn country_share(
    slice: &SubjectYearSlice,
    article_id: &str,
    countries: &CountrySet,
) -> Result<ShareVector, CorpusError> {
    let article = slice
        .article(article_id)
        .ok_or_else(|| CorpusError::UnknownArticle(article_id.to_string()))?;
    Ok(ShareVector(
        countries
            .with_others()
            .into_iter()
            .map(|c| {
                let s = article.share_of(&c, countries);
                (c, s)
            })
            .collect(),
    ))
}

/// Weighted authorship sum `n_c` of `country` over the slice.
pub fn weighted_count(
    slice: &SubjectYearSlice,
    country: &CountryCode,
    countries: &CountrySet,
) -> Result<f64, CorpusError> {
    Ok(slice.share_column(country, countries)?.iter().sum())
}

/// Summary of one ingestion pass.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub rows_read: usize,
    pub articles: usize,
    pub slices: usize,
    pub dropped_without_affiliation: usize,
    /// CSV line numbers of the dropped rows.
    pub dropped_lines: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCorpus {
    pub slices: Vec<SubjectYearSlice>,
    pub diagnostics: ParseDiagnostics,
}

/// Every row-level problem found by [`validate_corpus`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub diagnostics: ParseDiagnostics,
    pub errors: Vec<RowError>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

enum Row {
    Article(ArticleRecord),
    NoAffiliation,
}

fn parse_affiliations(field: &str, line: u64) -> Result<BTreeMap<CountryCode, u32>, CorpusError> {
    let mut authors: BTreeMap<CountryCode, u32> = BTreeMap::new();
    for entry in field.split(';').map(str::trim).filter(|e| !e.is_empty()) {
        let (code, count) = entry.split_once(':').ok_or_else(|| CorpusError::Parse {
            line,
            message: format!("affiliation entry {entry:?} is not COUNTRY:count"),
        })?;
        let code = CountryCode::new(code).map_err(|_| CorpusError::Parse {
            line,
            message: format!("invalid country code {code:?}"),
        })?;
        let count: u32 = count.trim().parse().map_err(|_| CorpusError::Parse {
            line,
            message: format!("author count {count:?} is not a non-negative integer"),
        })?;
        if count == 0 {
            return Err(CorpusError::Parse {
                line,
                message: format!("zero author count for {code}"),
            });
        }
        let slot = authors.entry(code).or_insert(0);
        *slot = slot.checked_add(count).ok_or_else(|| CorpusError::Parse {
            line,
            message: "author count overflow".into(),
        })?;
    }
    Ok(authors)
}

fn parse_row(record: &csv::StringRecord, line: u64) -> Result<Row, CorpusError> {
    let perr = |message: String| CorpusError::Parse { line, message };
    if record.len() != CORPUS_HEADER.len() {
        return Err(perr(format!(
            "expected {} columns, found {}",
            CORPUS_HEADER.len(),
            record.len()
        )));
    }
    let id = record[0].trim();
    if id.is_empty() {
        return Err(perr("empty article id".into()));
    }
    let subject = record[1].trim();
    if subject.is_empty() {
        return Err(perr("empty subject".into()));
    }
    let year: i32 = record[2]
        .trim()
        .parse()
        .map_err(|_| perr(format!("year {:?} is not an integer", &record[2])))?;
    let raw_citations = record[3].trim();
    let citations: u64 = raw_citations.parse().map_err(|_| {
        if raw_citations.starts_with('-') {
            perr(format!("negative citation count {raw_citations}"))
        } else {
            perr(format!("citation count {raw_citations:?} is not a non-negative integer"))
        }
    })?;
    let authors = parse_affiliations(&record[4], line)?;
    if authors.is_empty() {
        return Ok(Row::NoAffiliation);
    }
    let article = ArticleRecord::new(id, subject, year, citations, authors)
        .map_err(|e| perr(e.to_string()))?;
    debug_assert!((article.shares.values().sum::<f64>() - 1.0).abs() < SHARE_SUM_TOLERANCE);
    Ok(Row::Article(article))
}

/// Streams the CSV, calling `on_row` with each parsed row or row error.
fn scan<R: Read>(
    stream: R,
    mut on_row: impl FnMut(u64, Result<Row, CorpusError>) -> Result<(), CorpusError>,
) -> Result<(), CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(stream);
    let headers = reader
        .headers()
        .map_err(|e| CorpusError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let names: Vec<String> = headers.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    if names != CORPUS_HEADER {
        return Err(CorpusError::Parse {
            line: 1,
            message: format!("header must be {}", CORPUS_HEADER.join(",")),
        });
    }
    let mut record = csv::StringRecord::new();
    loop {
        let line = reader.position().line();
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map_or(line, |p| p.line());
                if record.len() == 1 && record[0].trim().is_empty() {
                    continue;
                }
                on_row(line, parse_row(&record, line))?;
            }
            Err(e) => {
                let line = e.position().map_or(line, |p| p.line());
                on_row(
                    line,
                    Err(CorpusError::Parse {
                        line,
                        message: e.to_string(),
                    }),
                )?;
                if !matches!(e.kind(), csv::ErrorKind::Utf8 { .. }) {
                    break;
                }
            }
        }
    }
    Ok(())
}

#[derive(Default)]
struct SliceBuilder {
    slices: BTreeMap<(String, i32), (SubjectYearSlice, HashSet<String>)>,
    diagnostics: ParseDiagnostics,
}

impl SliceBuilder {
    fn add(&mut self, line: u64, row: Row) -> Result<(), CorpusError> {
        self.diagnostics.rows_read += 1;
        match row {
            Row::NoAffiliation => {
                self.diagnostics.dropped_without_affiliation += 1;
                self.diagnostics.dropped_lines.push(line);
            }
            Row::Article(article) => {
                let key = (article.subject.clone(), article.year);
                let (slice, ids) = self
                    .slices
                    .entry(key)
                    .or_insert_with(|| (SubjectYearSlice::new(&article.subject, article.year), HashSet::new()));
                if !ids.insert(article.id.clone()) {
                    return Err(CorpusError::DuplicateId {
                        id: article.id,
                        subject: slice.subject.clone(),
                        year: slice.year,
                        line,
                    });
                }
                slice.articles.push(article);
                self.diagnostics.articles += 1;
            }
        }
        Ok(())
    }

    fn finish(mut self) -> ParsedCorpus {
        let slices: Vec<_> = self.slices.into_values().map(|(s, _)| s).collect();
        self.diagnostics.slices = slices.len();
        ParsedCorpus {
            slices,
            diagnostics: self.diagnostics,
        }
    }
}

/// Parses a corpus CSV into slices ordered by (subject, year); articles keep
/// their input order. Stops at the first malformed row.
pub fn parse_corpus<R: Read>(stream: R) -> Result<ParsedCorpus, CorpusError> {
    let mut builder = SliceBuilder::default();
    scan(stream, |line, row| builder.add(line, row?))?;
    Ok(builder.finish())
}

/// Like [`parse_corpus`] but collects every row error instead of stopping.
pub fn validate_corpus<R: Read>(stream: R) -> ValidationReport {
    let mut builder = SliceBuilder::default();
    let mut errors = Vec::new();
    let scanned = scan(stream, |line, row| {
        let outcome = row.and_then(|r| builder.add(line, r));
        if let Err(e) = outcome {
            errors.push(RowError {
                line,
                message: e.to_string(),
            });
        }
        Ok(())
    });
    if let Err(e) = scanned {
        let line = match &e {
            CorpusError::Parse { line, .. } => *line,
            _ => 0,
        };
        errors.push(RowError {
            line,
            message: e.to_string(),
        });
    }
    ValidationReport {
        diagnostics: builder.finish().diagnostics,
        errors,
    }
}

/// Writes slices back out in the corpus CSV format.
pub fn write_corpus<W: Write>(sink: W, slices: &[SubjectYearSlice]) -> Result<(), CorpusError> {
    let mut writer = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(sink);
    let csv_err = |e: csv::Error| CorpusError::Csv(e.to_string());
    writer.write_record(CORPUS_HEADER).map_err(csv_err)?;
    for slice in slices {
        for a in &slice.articles {
            writer
                .write_record([
                    a.id.as_str(),
                    a.subject.as_str(),
                    &a.year.to_string(),
                    &a.citations.to_string(),
                    &a.affiliation_field(),
                ])
                .map_err(csv_err)?;
        }
    }
    writer.flush()?;
    Ok(())
}
