//! National citation-impact indicators for article corpora.
//!
//! The pipeline is: parse a corpus CSV into subject/year slices
//! ([`corpus`]), compute per-country indicators with confidence intervals for
//! each slice ([`indicators`], backed by [`stats`] and [`regression`]), then
//! summarise across subjects with medians ([`aggregate`]). [`synth`] generates
//! seeded corpora with known ground truth for calibration checks.

pub mod aggregate;
pub mod cli;
pub mod corpus;
pub mod indicators;
pub mod regression;
pub mod stats;
pub mod synth;

pub use corpus::{ArticleRecord, CountryCode, CountrySet, SubjectYearSlice, OTHERS};
pub use indicators::{BootstrapConfig, IndicatorResult, Method};
pub use stats::{CiMode, Interval};
