use std::ops::Range;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Deserializer, Serialize};

use super::PipelineError;
use crate::env::FeatureNormalizer;
use crate::marketdata::{format_timestamp, parse_timestamp, MarketDataset};

/// Half-open time range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DateRange {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

pub(crate) fn parse_instant(s: &str) -> Result<DateTime<Utc>, String> {
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc());
    }
    parse_timestamp(s)
}

impl<'de> Deserialize<'de> for DateRange {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [a, b] = <[String; 2]>::deserialize(d)?;
        let start = parse_instant(&a).map_err(serde::de::Error::custom)?;
        let end = parse_instant(&b).map_err(serde::de::Error::custom)?;
        Ok(DateRange { start, end })
    }
}

impl DateRange {
    pub fn new(start: DateTime<Utc>, end: DateTime<Utc>) -> Self {
        DateRange { start, end }
    }

    /// Rows whose timestamp lies in the range.
    pub fn rows(&self, ds: &MarketDataset) -> Range<usize> {
        let ts = ds.timestamps();
        let a = ts.partition_point(|t| *t < self.start);
        let b = ts.partition_point(|t| *t < self.end);
        a..b.max(a)
    }
}

impl std::fmt::Display for DateRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {})", format_timestamp(&self.start), format_timestamp(&self.end))
    }
}

/// Train, validation and test ranges in strict temporal order. Gaps
/// between ranges are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train: DateRange,
    pub valid: DateRange,
    pub test: DateRange,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let order = [
            ("train", self.train.start, self.train.end),
            ("valid", self.valid.start, self.valid.end),
            ("test", self.test.start, self.test.end),
        ];
        for (name, s, e) in order {
            if s >= e {
                return Err(PipelineError::OverlappingSplits(format!("{name} range is empty or reversed")));
            }
        }
        if self.train.end > self.valid.start || self.valid.end > self.test.start {
            return Err(PipelineError::OverlappingSplits(format!(
                "train {} / valid {} / test {}",
                self.train, self.valid, self.test
            )));
        }
        Ok(())
    }

    pub fn window_rows(&self, ds: &MarketDataset) -> Result<WindowRows, PipelineError> {
        self.validate()?;
        let rows = WindowRows { train: self.train.rows(ds), valid: self.valid.rows(ds), test: self.test.rows(ds) };
        for (name, r) in [("train", &rows.train), ("valid", &rows.valid), ("test", &rows.test)] {
            if r.is_empty() {
                return Err(PipelineError::EmptySlice(name.to_string()));
            }
        }
        Ok(rows)
    }
}

/// Row ranges (half-open) of one train / validate / test window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowRows {
    pub train: Range<usize>,
    pub valid: Range<usize>,
    pub test: Range<usize>,
}

/// Walk-forward windows measured in bars.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RollingWindowSpec {
    pub window_length: usize,
    pub validation_length: usize,
    pub test_length: usize,
    pub step: usize,
    /// Grow the train slice from the first bar instead of sliding it.
    #[serde(default)]
    pub expanding: bool,
}

impl RollingWindowSpec {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.window_length < 2 || self.validation_length < 2 || self.test_length == 0 || self.step == 0 {
            return Err(PipelineError::Config(
                "rolling lengths must be positive (train and validation need at least 2 bars)".into(),
            ));
        }
        if self.step > self.test_length {
            return Err(PipelineError::Config("rolling step must not exceed test_length".into()));
        }
        Ok(())
    }

    /// Windows over `n_rows` bars. Window `k` trains on
    /// `[k*step, k*step + window_length)`, validates on the next
    /// `validation_length` bars and trades the following `step` bars. Each
    /// test range also holds the next window's first test bar so that
    /// consecutive segments share their boundary bar; the last window is
    /// truncated at the end of the data.
    pub fn windows(&self, n_rows: usize) -> Result<Vec<WindowRows>, PipelineError> {
        self.validate()?;
        let mut out = Vec::new();
        let mut k = 0;
        loop {
            let a = if self.expanding { 0 } else { k * self.step };
            let b = k * self.step + self.window_length;
            let c = b + self.validation_length;
            if c + 2 > n_rows {
                break;
            }
            let d = (c + self.step).min(n_rows - 1);
            out.push(WindowRows { train: a..b, valid: b..c, test: c..d + 1 });
            if d == n_rows - 1 {
                break;
            }
            k += 1;
        }
        if out.is_empty() {
            return Err(PipelineError::InsufficientData(format!(
                "{n_rows} bars cannot hold one window of {} + {} + 1 bars",
                self.window_length, self.validation_length
            )));
        }
        Ok(out)
    }
}

/// Train / validation / test slices plus the normalizer fit on train.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: MarketDataset,
    pub valid: MarketDataset,
    pub test: MarketDataset,
    pub normalizer: FeatureNormalizer,
    pub rows: WindowRows,
}

pub fn split_dataset(ds: &MarketDataset, spec: &SplitSpec) -> Result<Splits, PipelineError> {
    let rows = spec.window_rows(ds)?;
    let train = ds.slice_rows(rows.train.clone())?;
    let normalizer = FeatureNormalizer::fit(&train);
    Ok(Splits { valid: ds.slice_rows(rows.valid.clone())?, test: ds.slice_rows(rows.test.clone())?, train, normalizer, rows })
}
