use std::ops::Range;

use chrono::{DateTime, Utc};

use super::{DataError, Interval, BASE_COLUMNS};

/// Aligned `T x N x F` panel of prices and features.
///
/// Values are stored row-major as `values[(t * N + n) * F + f]`. Each
/// `(ticker, column)` pair carries the first row at which it is defined
/// (`valid_from`); rows before it hold 0 and are masked out.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketDataset {
    timestamps: Vec<DateTime<Utc>>,
    tickers: Vec<String>,
    columns: Vec<String>,
    values: Vec<f64>,
    valid_from: Vec<usize>,
    interval: Interval,
}

impl MarketDataset {
    /// Builds a fully-valid dataset. The first five columns must be OHLCV.
    pub fn new(
        timestamps: Vec<DateTime<Utc>>,
        tickers: Vec<String>,
        columns: Vec<String>,
        values: Vec<f64>,
        interval: Interval,
    ) -> Result<Self, DataError> {
        let valid_from = vec![0; tickers.len() * columns.len()];
        Self::with_mask(timestamps, tickers, columns, values, valid_from, interval)
    }

    pub fn with_mask(
        timestamps: Vec<DateTime<Utc>>,
        tickers: Vec<String>,
        columns: Vec<String>,
        values: Vec<f64>,
        valid_from: Vec<usize>,
        interval: Interval,
    ) -> Result<Self, DataError> {
        let bad = |m: &str| Err(DataError::InvalidDataset(m.to_string()));
        if timestamps.is_empty() || tickers.is_empty() {
            return bad("empty dataset");
        }
        if columns.len() < 5 || columns[..5].iter().zip(BASE_COLUMNS).any(|(a, b)| a != b) {
            return bad("first five columns must be open, high, low, close, volume");
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].contains(c) {
                return Err(DataError::InvalidDataset(format!("duplicate column `{c}`")));
            }
        }
        if timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return bad("timestamps must be strictly increasing");
        }
        if values.len() != timestamps.len() * tickers.len() * columns.len() {
            return bad("value tensor has wrong length");
        }
        if valid_from.len() != tickers.len() * columns.len() {
            return bad("validity mask has wrong length");
        }
        let f = columns.len();
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(DataError::InvalidDataset(format!("non-finite value at flat index {i}")));
            }
            if i % f == 3 && *v <= 0.0 {
                return bad("close prices must be positive");
            }
        }
        Ok(MarketDataset { timestamps, tickers, columns, values, valid_from, interval })
    }

    pub fn timestamps(&self) -> &[DateTime<Utc>] {
        &self.timestamps
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn n_rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn n_tickers(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    #[inline]
    pub fn get(&self, t: usize, n: usize, f: usize) -> f64 {
        self.values[(t * self.tickers.len() + n) * self.columns.len() + f]
    }

    #[inline]
    pub fn close(&self, t: usize, n: usize) -> f64 {
        self.get(t, n, 3)
    }

    /// All columns of ticker `n` at row `t`.
    pub fn cell(&self, t: usize, n: usize) -> &[f64] {
        let f = self.columns.len();
        let start = (t * self.tickers.len() + n) * f;
        &self.values[start..start + f]
    }

    /// All tickers and columns at row `t`, ticker-major.
    pub fn row(&self, t: usize) -> &[f64] {
        let w = self.tickers.len() * self.columns.len();
        &self.values[t * w..(t + 1) * w]
    }

    pub fn closes_at(&self, t: usize) -> Vec<f64> {
        (0..self.tickers.len()).map(|n| self.close(t, n)).collect()
    }

    pub fn series(&self, n: usize, f: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|t| self.get(t, n, f)).collect()
    }

    pub fn valid_from(&self, n: usize, f: usize) -> usize {
        self.valid_from[n * self.columns.len() + f]
    }

    pub fn is_valid(&self, t: usize, n: usize, f: usize) -> bool {
        t >= self.valid_from(n, f)
    }

    pub fn mask(&self) -> &[usize] {
        &self.valid_from
    }

    /// First row at which every column of every ticker is defined.
    pub fn first_fully_valid_row(&self) -> usize {
        self.valid_from.iter().copied().max().unwrap_or(0)
    }

    /// Rows `range` as a new dataset; validity offsets shift accordingly.
    pub fn slice_rows(&self, range: Range<usize>) -> Result<Self, DataError> {
        if range.start >= range.end || range.end > self.n_rows() {
            return Err(DataError::InvalidDataset(format!(
                "row range {}..{} outside 0..{}",
                range.start,
                range.end,
                self.n_rows()
            )));
        }
        let w = self.tickers.len() * self.columns.len();
        let values = self.values[range.start * w..range.end * w].to_vec();
        let valid_from = self.valid_from.iter().map(|v| v.saturating_sub(range.start)).collect();
        Ok(MarketDataset {
            timestamps: self.timestamps[range].to_vec(),
            tickers: self.tickers.clone(),
            columns: self.columns.clone(),
            values,
            valid_from,
            interval: self.interval,
        })
    }

    /// Appends columns. `new_values[k]` is the `T x N` row-major series for
    /// `names[k]`, and `new_valid[k][n]` its first valid row for ticker `n`.
    pub fn with_columns(
        &self,
        names: &[String],
        new_values: &[Vec<f64>],
        new_valid: &[Vec<usize>],
    ) -> Result<Self, DataError> {
        for (i, name) in names.iter().enumerate() {
            if self.columns.contains(name) || names[..i].contains(name) {
                return Err(DataError::InvalidDataset(format!("column `{name}` already exists")));
            }
        }
        let (t_len, n_len, f_old) = (self.n_rows(), self.n_tickers(), self.n_columns());
        let f_new = f_old + names.len();
        let mut values = Vec::with_capacity(t_len * n_len * f_new);
        for t in 0..t_len {
            for n in 0..n_len {
                values.extend_from_slice(self.cell(t, n));
                for col in new_values {
                    values.push(col[t * n_len + n]);
                }
            }
        }
        let mut valid_from = Vec::with_capacity(n_len * f_new);
        for n in 0..n_len {
            valid_from.extend_from_slice(&self.valid_from[n * f_old..(n + 1) * f_old]);
            for v in new_valid {
                valid_from.push(v[n]);
            }
        }
        let mut columns = self.columns.clone();
        columns.extend(names.iter().cloned());
        Self::with_mask(self.timestamps.clone(), self.tickers.clone(), columns, values, valid_from, self.interval)
    }

    /// Keeps only the given columns (the OHLCV block is always kept).
    pub fn select_columns(&self, keep: &[String]) -> Result<Self, DataError> {
        let mut idx: Vec<usize> = (0..5).collect();
        for k in keep {
            let i = self
                .column_index(k)
                .ok_or_else(|| DataError::InvalidDataset(format!("unknown column `{k}`")))?;
            if !idx.contains(&i) {
                idx.push(i);
            }
        }
        let mut values = Vec::with_capacity(self.n_rows() * self.n_tickers() * idx.len());
        for t in 0..self.n_rows() {
            for n in 0..self.n_tickers() {
                let c = self.cell(t, n);
                values.extend(idx.iter().map(|&i| c[i]));
            }
        }
        let valid_from = (0..self.n_tickers())
            .flat_map(|n| idx.iter().map(move |&i| (n, i)))
            .map(|(n, i)| self.valid_from(n, i))
            .collect();
        let columns = idx.iter().map(|&i| self.columns[i].clone()).collect();
        Self::with_mask(self.timestamps.clone(), self.tickers.clone(), columns, values, valid_from, self.interval)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn tiny() -> MarketDataset {
        let ts = (0..3).map(|d| Utc.with_ymd_and_hms(2021, 1, 1 + d, 0, 0, 0).unwrap()).collect();
        let cols = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
        let mut v = Vec::new();
        for t in 0..3 {
            for n in 0..2 {
                let p = 10.0 + t as f64 + n as f64;
                v.extend([p, p, p, p, 100.0]);
            }
        }
        MarketDataset::new(ts, vec!["A".into(), "B".into()], cols, v, Interval::Day1).unwrap()
    }

    #[test]
    fn indexing_and_slicing() {
        let d = tiny();
        assert_eq!(d.close(2, 1), 13.0);
        let s = d.slice_rows(1..3).unwrap();
        assert_eq!(s.n_rows(), 2);
        assert_eq!(s.close(0, 0), 11.0);
    }

    #[test]
    fn append_columns_rejects_collision() {
        let d = tiny();
        let col = vec![1.0; 6];
        let d2 = d.with_columns(&["x".into()], &[col.clone()], &[vec![1, 0]]).unwrap();
        assert_eq!(d2.n_columns(), 6);
        assert!(!d2.is_valid(0, 0, 5));
        assert!(d2.is_valid(0, 1, 5));
        assert_eq!(d2.first_fully_valid_row(), 1);
        assert!(d2.with_columns(&["x".into()], &[col], &[vec![0, 0]]).is_err());
    }

    #[test]
    fn rejects_nonpositive_close() {
        let d = tiny();
        let mut v = d.values().to_vec();
        v[3] = 0.0;
        let r = MarketDataset::new(d.timestamps().to_vec(), d.tickers().to_vec(), d.columns().to_vec(), v, Interval::Day1);
        assert!(r.is_err());
    }
}
