//! Market data ingestion: CSV files, a paginated HTTP source, and a
//! synthetic GBM generator, merged into one aligned [`MarketDataset`].

mod align;
mod binfmt;
mod csvio;
mod dataset;
mod gbm;
mod http;
mod types;

pub use align::align;
pub use binfmt::{read_dataset, write_dataset};
pub use csvio::{format_timestamp, load_csv, parse_timestamp, read_csv, write_csv, write_dataset_csv};
pub use dataset::MarketDataset;
pub use gbm::{generate_gbm, generate_gbm_from, GbmParams};
pub use http::{fetch_http, DataSourceSpec, HttpSource, RateLimiter};
pub use types::{Bar, Interval, RawTable, BASE_COLUMNS};

use chrono::{DateTime, Utc};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("duplicate row for ({ticker}, {timestamp})")]
    DuplicateKey { ticker: String, timestamp: DateTime<Utc> },
    #[error("csv header mismatch: expected `{expected}`, found `{found}`")]
    SchemaMismatch { expected: String, found: String },
    #[error("http request failed with status {status}")]
    HttpError { status: u16 },
    #[error("rate limited by data source")]
    RateLimited,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("data source returned zero bars")]
    EmptyResponse,
    #[error("correlation matrix is not positive semi-definite")]
    NonPsdCorrelation,
    #[error("tables have different intervals")]
    IntervalMismatch,
    #[error("no input tables or rows")]
    EmptyInput,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("bad format: {0}")]
    BadFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DataError {
    /// Whether a request that failed with this error may be retried.
    pub fn is_retryable(&self) -> bool {
        match self {
            DataError::RateLimited | DataError::Transport(_) => true,
            DataError::HttpError { status } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// A source that produces raw bars for a set of tickers over a time range.
pub trait DataSourceAdapter {
    fn fetch(
        &self,
        tickers: &[String],
        start: DateTime<Utc>,
        end: DateTime<Utc>,
        interval: Interval,
    ) -> Result<RawTable, DataError>;
}
