//! Direct-definition indicator oracles: every smoothed value is an explicit
//! weighted sum over raw inputs, with no recursion shared with the library.

use chrono::{Duration, TimeZone, Utc};
use marketforge::features::{compute_indicator, IndicatorKind};
use marketforge::marketdata::{Interval, MarketDataset, BASE_COLUMNS};
use marketforge::seed::stream_rng;
use rand::Rng;

pub fn column(ds: &MarketDataset, name: &str, n: usize) -> Vec<f64> {
    ds.series(n, ds.column_index(name).unwrap())
}

pub fn close_enough(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Random OHLC bars for `n` tickers over `t` rows.
pub fn random_ohlc(n: usize, t: usize, seed: u64, scale: f64) -> MarketDataset {
    let mut rng = stream_rng(seed, 3);
    let t0 = Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap();
    let ts = (0..t).map(|k| t0 + Duration::days(k as i64)).collect();
    let mut close: Vec<f64> = vec![100.0; n];
    let mut values = Vec::with_capacity(t * n * 5);
    for _ in 0..t {
        for c in close.iter_mut() {
            let open: f64 = *c;
            *c *= 1.0 + rng.random_range(-0.03..0.03);
            let high = open.max(*c) * (1.0 + rng.random_range(0.0..0.01));
            let low = open.min(*c) * (1.0 - rng.random_range(0.0..0.01));
            values.extend([open * scale, high * scale, low * scale, *c * scale, 1000.0]);
        }
    }
    let tickers = (0..n).map(|i| format!("S{i}")).collect();
    let cols = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    MarketDataset::new(ts, tickers, cols, values, Interval::Day1).unwrap()
}


// Direct-definition oracles: every smoothed value is an explicit weighted
// sum over the raw inputs.

/// EMA with `alpha` seeded by `x[0]`: `(1-a)^t x_0 + sum_k a (1-a)^(t-k) x_k`.
pub fn ema_direct(x: &[f64], alpha: f64, t: usize) -> f64 {
    let mut s = (1.0 - alpha).powi(t as i32) * x[0];
    for k in 1..=t {
        s += alpha * (1.0 - alpha).powi((t - k) as i32) * x[k];
    }
    s
}

/// Wilder average of `d` at `t`, seeded by the plain mean of `d[first..first+w]`.
pub fn wilder_direct(d: &[f64], w: usize, first: usize, t: usize) -> f64 {
    let seed_end = first + w - 1;
    let a = 1.0 / w as f64;
    let seed: f64 = d[first..=seed_end].iter().sum::<f64>() / w as f64;
    let mut s = (1.0 - a).powi((t - seed_end) as i32) * seed;
    for k in seed_end + 1..=t {
        s += a * (1.0 - a).powi((t - k) as i32) * d[k];
    }
    s
}

/// MACD line and signal for every bar.
pub fn macd_oracle(close: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let lines: Vec<f64> =
        (0..close.len()).map(|k| ema_direct(close, 2.0 / 13.0, k) - ema_direct(close, 2.0 / 27.0, k)).collect();
    let signal = (0..close.len()).map(|k| ema_direct(&lines, 2.0 / 10.0, k)).collect();
    (lines, signal)
}

/// RSI for every bar from `w` on (earlier entries are 0).
pub fn rsi_oracle(close: &[f64], w: usize) -> Vec<f64> {
    let n = close.len();
    let mut gains = vec![0.0; n];
    let mut losses = vec![0.0; n];
    for k in 1..n {
        let d = close[k] - close[k - 1];
        gains[k] = d.max(0.0);
        losses[k] = (-d).max(0.0);
    }
    (0..n)
        .map(|t| {
            if t < w {
                return 0.0;
            }
            let g = wilder_direct(&gains, w, 1, t);
            let l = wilder_direct(&losses, w, 1, t);
            if l == 0.0 {
                if g == 0.0 { 50.0 } else { 100.0 }
            } else {
                100.0 * g / (g + l)
            }
        })
        .collect()
}

/// CCI for every bar from `w - 1` on.
pub fn cci_oracle(h: &[f64], l: &[f64], c: &[f64], w: usize) -> Vec<f64> {
    let tp = |k: usize| (h[k] + l[k] + c[k]) / 3.0;
    (0..c.len())
        .map(|t| {
            if t + 1 < w {
                return 0.0;
            }
            let mean = (t + 1 - w..=t).map(tp).sum::<f64>() / w as f64;
            let md = (t + 1 - w..=t).map(|k| (tp(k) - mean).abs()).sum::<f64>() / w as f64;
            if md == 0.0 { 0.0 } else { (tp(t) - mean) / (0.015 * md) }
        })
        .collect()
}

/// ADX for every bar from `2w - 1` on.
pub fn adx_oracle(h: &[f64], l: &[f64], c: &[f64], w: usize) -> Vec<f64> {
    let n = c.len();
    let (mut tr, mut pdm, mut ndm) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for k in 1..n {
        tr[k] = [h[k] - l[k], (h[k] - c[k - 1]).abs(), (l[k] - c[k - 1]).abs()].into_iter().fold(0.0, f64::max);
        let up = h[k] - h[k - 1];
        let down = l[k - 1] - l[k];
        pdm[k] = if up > down && up > 0.0 { up } else { 0.0 };
        ndm[k] = if down > up && down > 0.0 { down } else { 0.0 };
    }
    let dx: Vec<f64> = (0..n)
        .map(|k| {
            if k < w {
                return 0.0;
            }
            let trs = wilder_direct(&tr, w, 1, k);
            let p = 100.0 * wilder_direct(&pdm, w, 1, k) / trs;
            let m = 100.0 * wilder_direct(&ndm, w, 1, k) / trs;
            if p + m == 0.0 { 0.0 } else { 100.0 * (p - m).abs() / (p + m) }
        })
        .collect();
    (0..n).map(|t| if t + 1 < 2 * w { 0.0 } else { wilder_direct(&dx, w, w, t) }).collect()
}

/// Largest error (relative, floored at 1) between the library's MACD, signal,
/// RSI, CCI and ADX and the oracles on a random 2-ticker series of `t` bars,
/// over every bar where all indicators are defined.
pub fn indicator_oracle_error(seed: u64, t: usize) -> f64 {
    let ds = random_ohlc(2, t, seed, 1.0);
    let mut out = ds.clone();
    for spec in [IndicatorKind::macd(), IndicatorKind::rsi(), IndicatorKind::cci(), IndicatorKind::adx()] {
        out = compute_indicator(&out, &spec).unwrap();
    }
    let err = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
    let mut worst: f64 = 0.0;
    for n in 0..2 {
        let (h, l, c) = (ds.series(n, 1), ds.series(n, 2), ds.series(n, 3));
        let (m, sg) = macd_oracle(&c);
        let pairs = [
            (column(&out, "macd_12_26", n), m),
            (column(&out, "macd_signal_12_26_9", n), sg),
            (column(&out, "rsi_14", n), rsi_oracle(&c, 14)),
            (column(&out, "cci_20", n), cci_oracle(&h, &l, &c, 20)),
            (column(&out, "adx_14", n), adx_oracle(&h, &l, &c, 14)),
        ];
        for (got, want) in &pairs {
            for k in 33..t {
                worst = worst.max(err(got[k], want[k]));
            }
        }
    }
    worst
}
