use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use chrono::{DateTime, Days, Duration, Months, Utc};
use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::marketdata::MarketDataset;

/// Observations of one exogenous variable for one ticker, or for the whole
/// market when `ticker` is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExogenousTrack {
    pub ticker: Option<String>,
    pub timestamps: Vec<DateTime<Utc>>,
    pub values: Vec<f64>,
}

/// A named exogenous variable (VIX, sentiment, EPS, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct ExogenousSeries {
    pub name: String,
    pub tracks: Vec<ExogenousTrack>,
}

impl ExogenousSeries {
    pub fn market(name: impl Into<String>, timestamps: Vec<DateTime<Utc>>, values: Vec<f64>) -> Self {
        ExogenousSeries { name: name.into(), tracks: vec![ExogenousTrack { ticker: None, timestamps, values }] }
    }

    fn track_for(&self, ticker: &str) -> Option<&ExogenousTrack> {
        self.tracks
            .iter()
            .find(|t| t.ticker.as_deref() == Some(ticker))
            .or_else(|| self.tracks.iter().find(|t| t.ticker.is_none()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillPolicy {
    /// Rows with no datum yet read 0 and stay valid.
    FillZero,
    /// Rows with no datum yet are masked invalid.
    ForwardFill,
}

/// Publication delay applied to each datum before it becomes usable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lag {
    /// Usable at `timestamp + d`.
    Exact(Duration),
    /// Usable from the start of the day after the datum's date plus this many
    /// calendar months (a quarter ending 06/30 with two months becomes usable
    /// on 09/01).
    CalendarMonths(u32),
}

impl Lag {
    pub fn none() -> Self {
        Lag::Exact(Duration::zero())
    }

    pub fn effective(&self, ts: DateTime<Utc>) -> DateTime<Utc> {
        match *self {
            Lag::Exact(d) => ts + d,
            Lag::CalendarMonths(m) => {
                let next_day = ts.date_naive() + Days::new(1);
                let shifted = next_day + Months::new(m);
                shifted.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExogenousSpec {
    pub series: ExogenousSeries,
    pub policy: FillPolicy,
    pub lag: Lag,
}

/// Appends `series` as one column. Row `t` of a ticker receives the latest
/// value whose lagged availability time is at or before `t`.
pub fn attach_exogenous(
    ds: &MarketDataset,
    series: &ExogenousSeries,
    policy: FillPolicy,
    lag: Lag,
) -> Result<MarketDataset, FeatureError> {
    if ds.column_index(&series.name).is_some() {
        return Err(FeatureError::NameCollision(series.name.clone()));
    }
    for tr in &series.tracks {
        if tr.timestamps.windows(2).any(|w| w[0] >= w[1]) || tr.timestamps.len() != tr.values.len() {
            return Err(FeatureError::UnsortedSeries(series.name.clone()));
        }
    }
    let (rows, n_tickers) = (ds.n_rows(), ds.n_tickers());
    let mut col = vec![0.0; rows * n_tickers];
    let mut valid = vec![0usize; n_tickers];
    for (n, ticker) in ds.tickers().iter().enumerate() {
        let track = series.track_for(ticker);
        let effective: Vec<DateTime<Utc>> = track
            .map(|tr| tr.timestamps.iter().map(|ts| lag.effective(*ts)).collect())
            .unwrap_or_default();
        let mut next = 0usize;
        let mut current: Option<f64> = None;
        let mut first_valid = None;
        for (t, now) in ds.timestamps().iter().enumerate() {
            while next < effective.len() && effective[next] <= *now {
                current = Some(track.expect("effective times come from a track").values[next]);
                next += 1;
            }
            if let Some(v) = current {
                col[t * n_tickers + n] = v;
                first_valid.get_or_insert(t);
            }
        }
        valid[n] = match policy {
            FillPolicy::FillZero => 0,
            FillPolicy::ForwardFill => first_valid.unwrap_or(rows),
        };
    }
    Ok(ds.with_columns(&[series.name.clone()], &[col], &[valid])?)
}

/// Reads `timestamp,name,ticker_or_MARKET,value` rows, grouped by name in
/// order of first appearance.
pub fn load_exogenous_csv(path: impl AsRef<Path>) -> Result<Vec<ExogenousSeries>, FeatureError> {
    let mut rdr = csv::Reader::from_reader(File::open(path)?);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| FeatureError::BadFormat(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != ["timestamp", "name", "ticker_or_MARKET", "value"] {
        return Err(FeatureError::BadFormat(format!("unexpected header {}", header.join(","))));
    }
    let mut order: Vec<String> = Vec::new();
    let mut grouped: BTreeMap<(String, Option<String>), Vec<(DateTime<Utc>, f64)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| FeatureError::BadFormat(e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |m: String| FeatureError::BadFormat(format!("line {line}: {m}"));
        let ts = DateTime::parse_from_rfc3339(rec[0].trim()).map_err(|e| bad(e.to_string()))?.with_timezone(&Utc);
        let name = rec[1].to_string();
        let ticker = match &rec[2] {
            "MARKET" => None,
            t => Some(t.to_string()),
        };
        let value: f64 = rec[3].trim().parse().map_err(|e| bad(format!("{e}")))?;
        if !order.contains(&name) {
            order.push(name.clone());
        }
        grouped.entry((name, ticker)).or_default().push((ts, value));
    }
    let mut out: Vec<ExogenousSeries> =
        order.iter().map(|n| ExogenousSeries { name: n.clone(), tracks: Vec::new() }).collect();
    for ((name, ticker), mut points) in grouped {
        points.sort_by_key(|p| p.0);
        let series = out.iter_mut().find(|s| s.name == name).expect("name recorded");
        series.tracks.push(ExogenousTrack {
            ticker,
            timestamps: points.iter().map(|p| p.0).collect(),
            values: points.iter().map(|p| p.1).collect(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn two_month_lag_from_quarter_end() {
        let q = Utc.with_ymd_and_hms(2022, 6, 30, 0, 0, 0).unwrap();
        assert_eq!(Lag::CalendarMonths(2).effective(q), Utc.with_ymd_and_hms(2022, 9, 1, 0, 0, 0).unwrap());
        let q4 = Utc.with_ymd_and_hms(2021, 12, 31, 0, 0, 0).unwrap();
        assert_eq!(Lag::CalendarMonths(2).effective(q4), Utc.with_ymd_and_hms(2022, 3, 1, 0, 0, 0).unwrap());
    }
}
