use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};

use super::types::check_unique;
use super::{Bar, DataError, Interval, MarketDataset, RawTable};

const HEADER: [&str; 7] = ["timestamp", "ticker", "open", "high", "low", "close", "volume"];

pub fn load_csv(path: impl AsRef<Path>, interval: Interval) -> Result<RawTable, DataError> {
    let path = path.as_ref();
    let file = File::open(path)?;
    read_csv(file, interval, &path.display().to_string())
}

pub fn read_csv<R: Read>(reader: R, interval: Interval, source_id: &str) -> Result<RawTable, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| DataError::BadFormat(e.to_string()))?.clone();
    let found: Vec<&str> = headers.iter().collect();
    let with_adj = found.len() == 8 && found[7] == "adjusted_close";
    if found.len() < 7 || found[..7] != HEADER || (found.len() == 8 && !with_adj) || found.len() > 8 {
        return Err(DataError::SchemaMismatch {
            expected: HEADER.join(",") + "[,adjusted_close]",
            found: found.join(","),
        });
    }

    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            DataError::MalformedRow { line, reason: e.to_string() }
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |reason: String| DataError::MalformedRow { line, reason };
        if rec.len() != found.len() {
            return Err(bad(format!("expected {} fields, found {}", found.len(), rec.len())));
        }
        let timestamp = parse_timestamp(&rec[0]).map_err(&bad)?;
        let num = |i: usize| -> Result<f64, DataError> {
            rec[i].trim().parse::<f64>().map_err(|e| bad(format!("field `{}`: {e}", HEADER.get(i).unwrap_or(&"adjusted_close"))))
        };
        let adjusted_close = if with_adj && !rec[7].trim().is_empty() { Some(num(7)?) } else { None };
        let bar = Bar {
            timestamp,
            ticker: rec[1].to_string(),
            open: num(2)?,
            high: num(3)?,
            low: num(4)?,
            close: num(5)?,
            volume: num(6)?,
            adjusted_close,
        };
        if bar.ticker.is_empty() {
            return Err(bad("empty ticker".into()));
        }
        bar.validate().map_err(&bad)?;
        rows.push(bar);
    }
    rows.sort_by(|a, b| (&a.ticker, a.timestamp).cmp(&(&b.ticker, b.timestamp)));
    check_unique(&rows)?;
    Ok(RawTable { rows, source_id: source_id.to_string(), interval })
}

/// ISO-8601 with an explicit offset, normalized to UTC.
pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(s.trim())
        .map(|d| d.with_timezone(&Utc))
        .map_err(|e| format!("timestamp `{s}`: {e}"))
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Canonical serialization: fixed header, UTC `Z` timestamps, shortest
/// round-trip float formatting.
pub fn write_csv<W: Write>(table: &RawTable, out: W) -> Result<(), DataError> {
    let with_adj = table.rows.iter().any(|b| b.adjusted_close.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = HEADER.to_vec();
    if with_adj {
        header.push("adjusted_close");
    }
    w.write_record(&header).map_err(|e| DataError::BadFormat(e.to_string()))?;
    for b in &table.rows {
        let mut rec = vec![
            format_timestamp(&b.timestamp),
            b.ticker.clone(),
            b.open.to_string(),
            b.high.to_string(),
            b.low.to_string(),
            b.close.to_string(),
            b.volume.to_string(),
        ];
        if with_adj {
            rec.push(b.adjusted_close.map(|a| a.to_string()).unwrap_or_default());
        }
        w.write_record(&rec).map_err(|e| DataError::BadFormat(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the OHLCV block of a dataset in the CSV bar schema.
pub fn write_dataset_csv<W: Write>(ds: &MarketDataset, out: W) -> Result<(), DataError> {
    let mut rows = Vec::with_capacity(ds.n_rows() * ds.n_tickers());
    for (n, ticker) in ds.tickers().iter().enumerate() {
        for (t, ts) in ds.timestamps().iter().enumerate() {
            let c = ds.cell(t, n);
            rows.push(Bar {
                timestamp: *ts,
                ticker: ticker.clone(),
                open: c[0],
                high: c[1],
                low: c[2],
                close: c[3],
                volume: c[4],
                adjusted_close: None,
            });
        }
    }
    rows.sort_by(|a, b| (&a.ticker, a.timestamp).cmp(&(&b.ticker, b.timestamp)));
    write_csv(&RawTable { rows, source_id: "dataset".into(), interval: ds.interval() }, out)
}
