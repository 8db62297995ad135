use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::DataError;

/// Names of the five leading columns of every dataset.
pub const BASE_COLUMNS: [&str; 5] = ["open", "high", "low", "close", "volume"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Interval {
    #[serde(rename = "1m")]
    Min1,
    #[serde(rename = "5m")]
    Min5,
    #[serde(rename = "1h")]
    Hour1,
    #[serde(rename = "1d")]
    Day1,
}

impl Interval {
    pub fn as_str(self) -> &'static str {
        match self {
            Interval::Min1 => "1m",
            Interval::Min5 => "5m",
            Interval::Hour1 => "1h",
            Interval::Day1 => "1d",
        }
    }

    pub fn duration(self) -> Duration {
        match self {
            Interval::Min1 => Duration::minutes(1),
            Interval::Min5 => Duration::minutes(5),
            Interval::Hour1 => Duration::hours(1),
            Interval::Day1 => Duration::days(1),
        }
    }

    /// Bars per trading year, assuming 252 sessions of 6.5 hours.
    pub fn periods_per_year(self) -> f64 {
        match self {
            Interval::Min1 => 252.0 * 390.0,
            Interval::Min5 => 252.0 * 78.0,
            Interval::Hour1 => 252.0 * 6.5,
            Interval::Day1 => 252.0,
        }
    }

    /// Length of one bar in (trading) days.
    pub fn days_per_bar(self) -> f64 {
        252.0 / self.periods_per_year()
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Interval::Min1 => 0,
            Interval::Min5 => 1,
            Interval::Hour1 => 2,
            Interval::Day1 => 3,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => Interval::Min1,
            1 => Interval::Min5,
            2 => Interval::Hour1,
            3 => Interval::Day1,
            _ => return None,
        })
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Interval {
    type Err = DataError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1m" => Ok(Interval::Min1),
            "5m" => Ok(Interval::Min5),
            "1h" => Ok(Interval::Hour1),
            "1d" => Ok(Interval::Day1),
            other => Err(DataError::InvalidParams(format!("unknown interval `{other}`"))),
        }
    }
}

/// One OHLCV bar for one asset.
#[derive(Debug, Clone, PartialEq)]
pub struct Bar {
    pub timestamp: DateTime<Utc>,
    pub ticker: String,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
    pub adjusted_close: Option<f64>,
}

impl Bar {
    pub fn validate(&self) -> Result<(), String> {
        let prices = [self.open, self.high, self.low, self.close];
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err("prices must be finite and positive".into());
        }
        if let Some(a) = self.adjusted_close {
            if !a.is_finite() || a <= 0.0 {
                return Err("adjusted_close must be finite and positive".into());
            }
        }
        if !self.volume.is_finite() || self.volume < 0.0 {
            return Err("volume must be finite and non-negative".into());
        }
        if self.low > self.open.min(self.close) {
            return Err(format!("low {} above min(open, close)", self.low));
        }
        if self.high < self.open.max(self.close) {
            return Err(format!("high {} below max(open, close)", self.high));
        }
        if self.low > self.high {
            return Err(format!("low {} above high {}", self.low, self.high));
        }
        Ok(())
    }
}

/// Bars from one source, sorted by `(ticker, timestamp)` with unique keys.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub rows: Vec<Bar>,
    pub source_id: String,
    pub interval: Interval,
}

impl RawTable {
    /// Validates every bar, sorts, and rejects duplicate keys.
    pub fn from_bars(
        mut rows: Vec<Bar>,
        source_id: impl Into<String>,
        interval: Interval,
    ) -> Result<Self, DataError> {
        for (i, b) in rows.iter().enumerate() {
            b.validate()
                .map_err(|reason| DataError::MalformedRow { line: i as u64 + 1, reason })?;
        }
        rows.sort_by(|a, b| (&a.ticker, a.timestamp).cmp(&(&b.ticker, b.timestamp)));
        check_unique(&rows)?;
        Ok(RawTable { rows, source_id: source_id.into(), interval })
    }

    pub fn tickers(&self) -> Vec<String> {
        let mut t: Vec<String> = self.rows.iter().map(|b| b.ticker.clone()).collect();
        t.dedup();
        t
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub(crate) fn check_unique(sorted: &[Bar]) -> Result<(), DataError> {
    for w in sorted.windows(2) {
        if w[0].ticker == w[1].ticker && w[0].timestamp == w[1].timestamp {
            return Err(DataError::DuplicateKey {
                ticker: w[1].ticker.clone(),
                timestamp: w[1].timestamp,
            });
        }
    }
    Ok(())
}
