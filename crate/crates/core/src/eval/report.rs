use std::io::{Read, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{BacktestResult, EquityCurve, EvalError, MetricsReport};
use crate::marketdata::{format_timestamp, parse_timestamp};

/// One strategy column of the comparison grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub annual_return: Option<f64>,
    pub annual_volatility: Option<f64>,
    pub sharpe: Option<f64>,
    pub calmar: Option<f64>,
    pub max_drawdown: Option<f64>,
    pub n_periods: usize,
}

impl ComparisonRow {
    pub fn from_metrics(name: &str, m: &MetricsReport) -> Self {
        ComparisonRow {
            name: name.to_string(),
            annual_return: Some(m.annualized_return),
            annual_volatility: m.headline_volatility(),
            sharpe: m.sharpe,
            calmar: m.calmar,
            max_drawdown: Some(m.max_drawdown),
            n_periods: m.n_periods,
        }
    }
}

/// Side-by-side strategy comparison with one metric per row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub strategies: Vec<ComparisonRow>,
    pub meta: IndexMap<String, serde_json::Value>,
}

pub fn compare(results: &[BacktestResult]) -> Result<Comparison, EvalError> {
    if results.is_empty() {
        return Err(EvalError::NothingToCompare);
    }
    Ok(Comparison {
        strategies: results.iter().map(|r| ComparisonRow::from_metrics(&r.name, &r.metrics)).collect(),
        meta: IndexMap::new(),
    })
}

fn pct(x: Option<f64>) -> String {
    x.filter(|v| v.is_finite()).map_or_else(|| "n/a".to_string(), |v| format!("{:.1}%", v * 100.0))
}

fn ratio(x: Option<f64>) -> String {
    x.filter(|v| v.is_finite()).map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"))
}

impl Comparison {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("comparison serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        serde_json::from_str(text).map_err(|e| EvalError::BadFormat(e.to_string()))
    }

    /// Aligned text grid: one metric per line, one strategy per column.
    /// `title` fills the top-left cell (typically the test period).
    pub fn render_text(&self, title: &str) -> String {
        let labels = ["Annual Return", "Annual Volatility", "Sharpe Ratio", "Calmar Ratio", "Max Drawdown"];
        let cells: Vec<[String; 5]> = self
            .strategies
            .iter()
            .map(|r| {
                [pct(r.annual_return), pct(r.annual_volatility), ratio(r.sharpe), ratio(r.calmar), pct(r.max_drawdown)]
            })
            .collect();
        let first = labels.iter().map(|l| l.len()).chain([title.len()]).max().unwrap_or(0);
        let widths: Vec<usize> = self
            .strategies
            .iter()
            .zip(&cells)
            .map(|(r, c)| c.iter().map(String::len).chain([r.name.len()]).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let mut line = format!("{title:<first$}");
        for (r, w) in self.strategies.iter().zip(&widths) {
            line.push_str(&format!("  {:>w$}", r.name));
        }
        out.push_str(line.trim_end());
        out.push('\n');
        for (k, label) in labels.iter().enumerate() {
            let mut line = format!("{label:<first$}");
            for (c, w) in cells.iter().zip(&widths) {
                line.push_str(&format!("  {:>w$}", c[k]));
            }
            out.push_str(&line);
            out.push('\n');
        }
        out
    }
}

/// Writes `timestamp,value,return`; the first row's return is empty.
pub fn write_curve_csv<W: Write>(curve: &EquityCurve, out: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| EvalError::Io(std::io::Error::other(e));
    w.write_record(["timestamp", "value", "return"]).map_err(io)?;
    let values = curve.values();
    for (k, (ts, v)) in curve.timestamps().iter().zip(values).enumerate() {
        let ret = if k == 0 { String::new() } else { (v / values[k - 1] - 1.0).to_string() };
        w.write_record([format_timestamp(ts), v.to_string(), ret]).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve_csv<R: Read>(input: R) -> Result<EquityCurve, EvalError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| EvalError::BadFormat(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != ["timestamp", "value", "return"] {
        return Err(EvalError::BadFormat(format!("unexpected header {header:?}")));
    }
    let (mut ts, mut vs) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(|e| EvalError::BadFormat(e.to_string()))?;
        ts.push(parse_timestamp(&rec[0]).map_err(EvalError::BadFormat)?);
        vs.push(rec[1].parse::<f64>().map_err(|e| EvalError::BadFormat(e.to_string()))?);
    }
    EquityCurve::new(ts, vs)
}
