use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::Deserialize;

use super::csvio::{format_timestamp, parse_timestamp};
use super::{Bar, DataError, DataSourceAdapter, Interval, RawTable};

/// Pacing slack so that a server observing arrival times never sees more
/// than `rate_limit` requests in a one-second window despite network jitter.
const PACING_HEADROOM: f64 = 1.02;

#[derive(Debug, Clone, PartialEq)]
pub struct DataSourceSpec {
    pub base_url: String,
    pub auth_token: Option<String>,
    /// Requests per second.
    pub rate_limit: f64,
    pub max_retries: u32,
    pub timeout: Duration,
    /// First retry delay; doubles on each further attempt.
    pub backoff_base: Duration,
}

impl DataSourceSpec {
    pub fn new(base_url: impl Into<String>) -> Self {
        DataSourceSpec {
            base_url: base_url.into(),
            auth_token: None,
            rate_limit: 5.0,
            max_retries: 3,
            timeout: Duration::from_secs(30),
            backoff_base: Duration::from_millis(250),
        }
    }
}

/// Token bucket with capacity one: grants are spaced at least
/// `1 / rate` seconds apart.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(rate_per_sec: f64) -> Self {
        RateLimiter {
            interval: Duration::from_secs_f64(PACING_HEADROOM / rate_per_sec),
            next: Mutex::new(None),
        }
    }

    /// Blocks until a token is available.
    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next.lock().expect("rate limiter poisoned");
            let now = Instant::now();
            let slot = match *next {
                Some(t) if t > now => t,
                _ => now,
            };
            *next = Some(slot + self.interval);
            slot.saturating_duration_since(now)
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WireTime {
    Iso(String),
    EpochMillis(i64),
}

#[derive(Deserialize)]
struct WireBar {
    t: WireTime,
    ticker: String,
    o: f64,
    h: f64,
    l: f64,
    c: f64,
    v: f64,
}

#[derive(Deserialize)]
struct WirePage {
    bars: Vec<WireBar>,
    next_page: Option<u64>,
}

/// Paginated `GET {base_url}/ohlcv` client.
pub struct HttpSource {
    spec: DataSourceSpec,
    limiter: Arc<RateLimiter>,
    agent: ureq::Agent,
}

impl HttpSource {
    pub fn new(spec: DataSourceSpec) -> Result<Self, DataError> {
        if !(spec.rate_limit > 0.0) {
            return Err(DataError::InvalidParams("rate_limit must be positive".into()));
        }
        let limiter = Arc::new(RateLimiter::new(spec.rate_limit));
        Ok(Self::with_limiter(spec, limiter))
    }

    /// Shares `limiter` with other sources hitting the same provider.
    pub fn with_limiter(spec: DataSourceSpec, limiter: Arc<RateLimiter>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(spec.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpSource { spec, limiter, agent }
    }

    fn get_with_retry(&self, url: &str) -> Result<String, DataError> {
        let mut attempt = 0u32;
        loop {
            self.limiter.acquire();
            let mut req = self.agent.get(url);
            if let Some(tok) = &self.spec.auth_token {
                req = req.header("Authorization", &format!("Bearer {tok}"));
            }
            let outcome = match req.call() {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if status == 200 {
                        return resp
                            .body_mut()
                            .read_to_string()
                            .map_err(|e| DataError::Transport(e.to_string()));
                    }
                    if status == 429 {
                        DataError::RateLimited
                    } else {
                        DataError::HttpError { status }
                    }
                }
                Err(e) => DataError::Transport(e.to_string()),
            };
            if !outcome.is_retryable() {
                return Err(outcome);
            }
            if attempt >= self.spec.max_retries {
                return Err(match outcome {
                    DataError::RateLimited => DataError::HttpError { status: 429 },
                    other => other,
                });
            }
            log::debug!("retrying {url} after {outcome}");
            thread::sleep(self.spec.backoff_base * 2u32.saturating_pow(attempt));
            attempt += 1;
        }
    }
}

impl DataSourceAdapter for HttpSource {
    fn fetch(
        &self,
        tickers: &[String],
        start: DateTime<Utc>,
        end: DateTime<Utc>,
        interval: Interval,
    ) -> Result<RawTable, DataError> {
        if tickers.is_empty() {
            return Err(DataError::InvalidParams("tickers must be non-empty".into()));
        }
        if start >= end {
            return Err(DataError::InvalidParams("start must precede end".into()));
        }
        let base = self.spec.base_url.trim_end_matches('/');
        let mut bars = Vec::new();
        let mut page = 1u64;
        loop {
            let url = format!(
                "{base}/ohlcv?tickers={}&start={}&end={}&interval={}&page={page}",
                tickers.join(","),
                format_timestamp(&start),
                format_timestamp(&end),
                interval.as_str(),
            );
            let body = self.get_with_retry(&url)?;
            let parsed: WirePage =
                serde_json::from_str(&body).map_err(|e| DataError::BadFormat(format!("page {page}: {e}")))?;
            for b in parsed.bars {
                let timestamp = match b.t {
                    WireTime::Iso(s) => parse_timestamp(&s).map_err(DataError::BadFormat)?,
                    WireTime::EpochMillis(ms) => DateTime::<Utc>::from_timestamp_millis(ms)
                        .ok_or_else(|| DataError::BadFormat(format!("epoch {ms} out of range")))?,
                };
                bars.push(Bar {
                    timestamp,
                    ticker: b.ticker,
                    open: b.o,
                    high: b.h,
                    low: b.l,
                    close: b.c,
                    volume: b.v,
                    adjusted_close: None,
                });
            }
            match parsed.next_page {
                Some(k) if k > page => page = k,
                Some(k) => return Err(DataError::BadFormat(format!("next_page {k} does not advance past {page}"))),
                None => break,
            }
        }
        if bars.is_empty() {
            return Err(DataError::EmptyResponse);
        }
        RawTable::from_bars(bars, self.spec.base_url.clone(), interval)
    }
}

pub fn fetch_http(
    spec: &DataSourceSpec,
    tickers: &[String],
    start: DateTime<Utc>,
    end: DateTime<Utc>,
    interval: Interval,
) -> Result<RawTable, DataError> {
    HttpSource::new(spec.clone())?.fetch(tickers, start, end, interval)
}
