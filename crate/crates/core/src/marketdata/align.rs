use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};

use super::{Bar, DataError, MarketDataset, RawTable, BASE_COLUMNS};

/// Merges raw tables into one aligned dataset.
///
/// The common start is the latest per-ticker first observation; afterwards
/// every timestamp seen for any ticker is kept, and a ticker without a bar
/// at that instant is forward-filled from its last close with zero volume.
pub fn align(tables: &[RawTable]) -> Result<MarketDataset, DataError> {
    let first = tables.first().ok_or(DataError::EmptyInput)?;
    if tables.iter().any(|t| t.interval != first.interval) {
        return Err(DataError::IntervalMismatch);
    }

    let mut by_ticker: BTreeMap<&str, BTreeMap<DateTime<Utc>, &Bar>> = BTreeMap::new();
    for table in tables {
        for bar in &table.rows {
            let slot = by_ticker.entry(bar.ticker.as_str()).or_default();
            if slot.insert(bar.timestamp, bar).is_some() {
                return Err(DataError::DuplicateKey { ticker: bar.ticker.clone(), timestamp: bar.timestamp });
            }
        }
    }
    if by_ticker.is_empty() {
        return Err(DataError::EmptyInput);
    }

    let common_start = by_ticker
        .values()
        .map(|bars| *bars.keys().next().expect("non-empty per-ticker map"))
        .max()
        .expect("at least one ticker");
    let timestamps: Vec<DateTime<Utc>> = by_ticker
        .values()
        .flat_map(|bars| bars.range(common_start..).map(|(t, _)| *t))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let tickers: Vec<String> = by_ticker.keys().map(|s| s.to_string()).collect();
    let n_tickers = tickers.len();
    let f = BASE_COLUMNS.len();
    let mut values = vec![0.0; timestamps.len() * n_tickers * f];
    for (n, bars) in by_ticker.values().enumerate() {
        // last bar at or before the common start seeds the fill
        let mut last_close = bars.range(..=common_start).next_back().map(|(_, b)| b.close);
        for (t, ts) in timestamps.iter().enumerate() {
            let base = (t * n_tickers + n) * f;
            let cell = match bars.get(ts) {
                Some(b) => {
                    last_close = Some(b.close);
                    [b.open, b.high, b.low, b.close, b.volume]
                }
                None => {
                    let c = last_close.expect("common start guarantees a prior observation");
                    [c, c, c, c, 0.0]
                }
            };
            values[base..base + f].copy_from_slice(&cell);
        }
    }

    MarketDataset::new(
        timestamps,
        tickers,
        BASE_COLUMNS.iter().map(|s| s.to_string()).collect(),
        values,
        first.interval,
    )
}
