//! Technical indicators computed per ticker from OHLC columns.
//!
//! Warm-up rows hold 0 and are masked invalid in the output dataset.

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::marketdata::MarketDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum IndicatorKind {
    Sma { window: usize },
    Ema { window: usize },
    Macd {
        #[serde(default = "default_fast")]
        fast: usize,
        #[serde(default = "default_slow")]
        slow: usize,
        #[serde(default = "default_signal")]
        signal: usize,
    },
    Rsi {
        #[serde(default = "default_14")]
        window: usize,
    },
    Cci {
        #[serde(default = "default_20")]
        window: usize,
    },
    Adx {
        #[serde(default = "default_14")]
        window: usize,
    },
}

fn default_fast() -> usize {
    12
}
fn default_slow() -> usize {
    26
}
fn default_signal() -> usize {
    9
}
fn default_14() -> usize {
    14
}
fn default_20() -> usize {
    20
}

pub type IndicatorSpec = IndicatorKind;

impl IndicatorKind {
    pub fn macd() -> Self {
        IndicatorKind::Macd { fast: 12, slow: 26, signal: 9 }
    }
    pub fn rsi() -> Self {
        IndicatorKind::Rsi { window: 14 }
    }
    pub fn cci() -> Self {
        IndicatorKind::Cci { window: 20 }
    }
    pub fn adx() -> Self {
        IndicatorKind::Adx { window: 14 }
    }

    fn windows(&self) -> Vec<usize> {
        match *self {
            IndicatorKind::Sma { window }
            | IndicatorKind::Ema { window }
            | IndicatorKind::Rsi { window }
            | IndicatorKind::Cci { window }
            | IndicatorKind::Adx { window } => vec![window],
            IndicatorKind::Macd { fast, slow, signal } => vec![fast, slow, signal],
        }
    }

    /// Output column names, in order.
    pub fn column_names(&self) -> Vec<String> {
        match *self {
            IndicatorKind::Sma { window } => vec![format!("sma_{window}")],
            IndicatorKind::Ema { window } => vec![format!("ema_{window}")],
            IndicatorKind::Macd { fast, slow, signal } => {
                vec![format!("macd_{fast}_{slow}"), format!("macd_signal_{fast}_{slow}_{signal}")]
            }
            IndicatorKind::Rsi { window } => vec![format!("rsi_{window}")],
            IndicatorKind::Cci { window } => vec![format!("cci_{window}")],
            IndicatorKind::Adx { window } => vec![format!("adx_{window}")],
        }
    }

    /// First defined row of each output column.
    pub fn warmups(&self) -> Vec<usize> {
        match *self {
            IndicatorKind::Sma { window } | IndicatorKind::Ema { window } | IndicatorKind::Cci { window } => {
                vec![window - 1]
            }
            IndicatorKind::Macd { fast, slow, signal } => {
                let base = fast.max(slow) - 1;
                vec![base, base + signal - 1]
            }
            IndicatorKind::Rsi { window } => vec![window],
            IndicatorKind::Adx { window } => vec![2 * window - 1],
        }
    }

    pub fn warmup(&self) -> usize {
        self.warmups().into_iter().max().unwrap_or(0)
    }
}

/// Appends the indicator's column(s) for every ticker.
pub fn compute_indicator(ds: &MarketDataset, spec: &IndicatorSpec) -> Result<MarketDataset, FeatureError> {
    let windows = spec.windows();
    if windows.iter().any(|w| *w == 0) {
        return Err(FeatureError::InvalidWindow);
    }
    let rows = ds.n_rows();
    let widest = windows.iter().copied().max().unwrap_or(1);
    if widest >= rows || spec.warmup() >= rows {
        return Err(FeatureError::WindowTooLarge { window: widest, rows });
    }
    let names = spec.column_names();
    for name in &names {
        if ds.column_index(name).is_some() {
            return Err(FeatureError::NameCollision(name.clone()));
        }
    }
    let warmups = spec.warmups();
    let n_tickers = ds.n_tickers();
    let mut cols = vec![vec![0.0; rows * n_tickers]; names.len()];
    for n in 0..n_tickers {
        let (high, low, close) = (ds.series(n, 1), ds.series(n, 2), ds.series(n, 3));
        let outputs: Vec<Vec<f64>> = match *spec {
            IndicatorKind::Sma { window } => vec![sma(&close, window)],
            IndicatorKind::Ema { window } => vec![ema(&close, window)],
            IndicatorKind::Macd { fast, slow, signal } => {
                let (m, s) = macd(&close, fast, slow, signal);
                vec![m, s]
            }
            IndicatorKind::Rsi { window } => vec![rsi(&close, window)],
            IndicatorKind::Cci { window } => vec![cci(&high, &low, &close, window)],
            IndicatorKind::Adx { window } => vec![adx(&high, &low, &close, window)],
        };
        for (k, series) in outputs.iter().enumerate() {
            for t in warmups[k]..rows {
                cols[k][t * n_tickers + n] = series[t];
            }
        }
    }
    let valid: Vec<Vec<usize>> = warmups.iter().map(|w| vec![*w; n_tickers]).collect();
    ds.with_columns(&names, &cols, &valid).map_err(Into::into)
}

/// Simple moving average; entries before `w - 1` are 0.
pub fn sma(x: &[f64], w: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for t in (w - 1)..x.len() {
        out[t] = x[t + 1 - w..=t].iter().sum::<f64>() / w as f64;
    }
    out
}

/// Exponential moving average with `alpha = 2 / (w + 1)`, seeded by `x[0]`.
/// Returned unmasked for every row.
pub fn ema(x: &[f64], w: usize) -> Vec<f64> {
    let alpha = 2.0 / (w as f64 + 1.0);
    let mut out = Vec::with_capacity(x.len());
    let mut e = x[0];
    for (t, v) in x.iter().enumerate() {
        if t > 0 {
            e = alpha * v + (1.0 - alpha) * e;
        }
        out.push(e);
    }
    out
}

/// MACD line `EMA_fast - EMA_slow` and its `EMA_signal` signal line.
pub fn macd(close: &[f64], fast: usize, slow: usize, signal: usize) -> (Vec<f64>, Vec<f64>) {
    let (ef, es) = (ema(close, fast), ema(close, slow));
    let line: Vec<f64> = ef.iter().zip(&es).map(|(a, b)| a - b).collect();
    let sig = ema(&line, signal);
    (line, sig)
}

/// Wilder RSI. Defined from row `w`; flat windows give 50.
pub fn rsi(close: &[f64], w: usize) -> Vec<f64> {
    let n = close.len();
    let mut out = vec![0.0; n];
    if n <= w {
        return out;
    }
    let (mut gain, mut loss) = (0.0, 0.0);
    for t in 1..=w {
        let d = close[t] - close[t - 1];
        gain += d.max(0.0);
        loss += (-d).max(0.0);
    }
    gain /= w as f64;
    loss /= w as f64;
    let wf = w as f64;
    for t in w..n {
        if t > w {
            let d = close[t] - close[t - 1];
            gain = (gain * (wf - 1.0) + d.max(0.0)) / wf;
            loss = (loss * (wf - 1.0) + (-d).max(0.0)) / wf;
        }
        out[t] = rsi_from_averages(gain, loss);
    }
    out
}

pub(crate) fn rsi_from_averages(gain: f64, loss: f64) -> f64 {
    if loss == 0.0 {
        if gain == 0.0 {
            50.0
        } else {
            100.0
        }
    } else {
        100.0 - 100.0 / (1.0 + gain / loss)
    }
}

/// Commodity channel index over typical price; zero mean deviation gives 0.
pub fn cci(high: &[f64], low: &[f64], close: &[f64], w: usize) -> Vec<f64> {
    let tp: Vec<f64> = (0..close.len()).map(|t| (high[t] + low[t] + close[t]) / 3.0).collect();
    let mut out = vec![0.0; tp.len()];
    for t in (w - 1)..tp.len() {
        let win = &tp[t + 1 - w..=t];
        let mean = win.iter().sum::<f64>() / w as f64;
        let md = win.iter().map(|v| (v - mean).abs()).sum::<f64>() / w as f64;
        out[t] = if md == 0.0 { 0.0 } else { (tp[t] - mean) / (0.015 * md) };
    }
    out
}

/// Wilder ADX. Defined from row `2w - 1`.
pub fn adx(high: &[f64], low: &[f64], close: &[f64], w: usize) -> Vec<f64> {
    let n = close.len();
    let mut out = vec![0.0; n];
    if n < 2 * w {
        return out;
    }
    let wf = w as f64;
    let (mut tr_s, mut pdm_s, mut ndm_s) = (0.0, 0.0, 0.0);
    let mut dx_sum = 0.0;
    let mut adx_v = 0.0;
    for t in 1..n {
        let tr = (high[t] - low[t])
            .max((high[t] - close[t - 1]).abs())
            .max((low[t] - close[t - 1]).abs());
        let up = high[t] - high[t - 1];
        let down = low[t - 1] - low[t];
        let pdm = if up > down && up > 0.0 { up } else { 0.0 };
        let ndm = if down > up && down > 0.0 { down } else { 0.0 };
        if t <= w {
            tr_s += tr / wf;
            pdm_s += pdm / wf;
            ndm_s += ndm / wf;
        } else {
            tr_s = (tr_s * (wf - 1.0) + tr) / wf;
            pdm_s = (pdm_s * (wf - 1.0) + pdm) / wf;
            ndm_s = (ndm_s * (wf - 1.0) + ndm) / wf;
        }
        if t < w {
            continue;
        }
        let dx = directional_index(tr_s, pdm_s, ndm_s);
        if t < 2 * w - 1 {
            dx_sum += dx;
        } else if t == 2 * w - 1 {
            adx_v = (dx_sum + dx) / wf;
            out[t] = adx_v;
        } else {
            adx_v = (adx_v * (wf - 1.0) + dx) / wf;
            out[t] = adx_v;
        }
    }
    out
}

pub(crate) fn directional_index(tr: f64, pdm: f64, ndm: f64) -> f64 {
    if tr == 0.0 {
        return 0.0;
    }
    let (pdi, ndi) = (100.0 * pdm / tr, 100.0 * ndm / tr);
    if pdi + ndi == 0.0 {
        0.0
    } else {
        100.0 * (pdi - ndi).abs() / (pdi + ndi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn macd_of_constant_is_zero() {
        let (m, s) = macd(&[42.0; 60], 12, 26, 9);
        assert!(m.iter().chain(&s).all(|v| *v == 0.0));
    }

    #[test]
    fn rsi_monotone_up_is_100_and_flat_is_50() {
        let up: Vec<f64> = (0..40).map(|i| 10.0 + i as f64).collect();
        assert!(rsi(&up, 14)[14..].iter().all(|v| *v == 100.0));
        assert!(rsi(&[5.0; 30], 14)[14..].iter().all(|v| *v == 50.0));
    }

    #[test]
    fn cci_flat_is_zero() {
        let x = [3.0; 30];
        assert!(cci(&x, &x, &x, 20).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sma_values() {
        assert_eq!(sma(&[1.0, 2.0, 3.0, 4.0], 2), vec![0.0, 1.5, 2.5, 3.5]);
    }

    #[test]
    fn warmups_and_names() {
        assert_eq!(IndicatorKind::macd().warmups(), vec![25, 33]);
        assert_eq!(IndicatorKind::adx().warmup(), 27);
        assert_eq!(IndicatorKind::rsi().column_names(), vec!["rsi_14"]);
    }
}
