//! Little-endian binary dataset file: magic `MFDS`, version, interval code,
//! shape, timestamps (UTC microseconds), names, values, validity mask.

use std::io::{Read, Write};

use chrono::{DateTime, Utc};

use super::{DataError, Interval, MarketDataset};

const MAGIC: &[u8; 4] = b"MFDS";
const VERSION: u32 = 1;

fn put_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

pub fn write_dataset<W: Write>(ds: &MarketDataset, mut w: W) -> Result<(), DataError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[ds.interval().code()])?;
    for d in [ds.n_rows(), ds.n_tickers(), ds.n_columns()] {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for t in ds.timestamps() {
        w.write_all(&t.timestamp_micros().to_le_bytes())?;
    }
    for s in ds.tickers().iter().chain(ds.columns()) {
        put_str(&mut w, s)?;
    }
    for v in ds.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    for m in ds.mask() {
        w.write_all(&(*m as u64).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

struct Cursor<R> {
    r: R,
}

impl<R: Read> Cursor<R> {
    fn bytes<const K: usize>(&mut self) -> Result<[u8; K], DataError> {
        let mut b = [0u8; K];
        self.r.read_exact(&mut b).map_err(|e| DataError::BadFormat(format!("truncated dataset file: {e}")))?;
        Ok(b)
    }
    fn u64(&mut self) -> Result<u64, DataError> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn string(&mut self) -> Result<String, DataError> {
        let len = u32::from_le_bytes(self.bytes()?) as usize;
        let mut buf = vec![0u8; len];
        self.r.read_exact(&mut buf).map_err(|e| DataError::BadFormat(e.to_string()))?;
        String::from_utf8(buf).map_err(|e| DataError::BadFormat(e.to_string()))
    }
}

pub fn read_dataset<R: Read>(r: R) -> Result<MarketDataset, DataError> {
    let mut c = Cursor { r };
    if &c.bytes::<4>()? != MAGIC {
        return Err(DataError::BadFormat("not a dataset file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(c.bytes()?);
    if version != VERSION {
        return Err(DataError::BadFormat(format!("unsupported dataset version {version}")));
    }
    let interval = Interval::from_code(c.bytes::<1>()?[0])
        .ok_or_else(|| DataError::BadFormat("unknown interval code".into()))?;
    let (t, n, f) = (c.u64()? as usize, c.u64()? as usize, c.u64()? as usize);
    let mut timestamps = Vec::with_capacity(t);
    for _ in 0..t {
        let us = i64::from_le_bytes(c.bytes()?);
        timestamps.push(
            DateTime::<Utc>::from_timestamp_micros(us)
                .ok_or_else(|| DataError::BadFormat("timestamp out of range".into()))?,
        );
    }
    let tickers = (0..n).map(|_| c.string()).collect::<Result<Vec<_>, _>>()?;
    let columns = (0..f).map(|_| c.string()).collect::<Result<Vec<_>, _>>()?;
    let values = (0..t * n * f)
        .map(|_| c.bytes().map(f64::from_le_bytes))
        .collect::<Result<Vec<_>, _>>()?;
    let mask = (0..n * f).map(|_| c.u64().map(|v| v as usize)).collect::<Result<Vec<_>, _>>()?;
    MarketDataset::with_mask(timestamps, tickers, columns, values, mask, interval)
}
