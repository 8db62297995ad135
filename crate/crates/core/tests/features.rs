mod common;

use chrono::{Duration, TimeZone, Utc};
use common::indicators::*;
use marketforge::features::{
    attach_exogenous, build_feature_panel, compute_indicator, compute_turbulence, load_exogenous_csv,
    ExogenousSeries, ExogenousSpec, ExogenousTrack, FeatureError, FillPolicy, IndicatorKind, Lag,
};
use marketforge::marketdata::{generate_gbm, align, GbmParams, Interval, MarketDataset, BASE_COLUMNS};
use proptest::prelude::*;

fn from_closes(closes: &[f64]) -> MarketDataset {
    let t0 = Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap();
    let ts = (0..closes.len()).map(|k| t0 + Duration::days(k as i64)).collect();
    let values = closes.iter().flat_map(|c| [*c, *c, *c, *c, 1.0]).collect();
    let cols = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    MarketDataset::new(ts, vec!["X".into()], cols, values, Interval::Day1).unwrap()
}

#[test]
fn indicators_match_direct_definitions() {
    let start = std::time::Instant::now();
    for seed in 0..3 {
        let err = indicator_oracle_error(seed, 500);
        assert!(err < 1e-9, "seed {seed}: {err}");
    }
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn warmup_rows_are_zero_and_masked() {
    let mut out = random_ohlc(1, 100, 4, 1.0);
    for spec in [IndicatorKind::macd(), IndicatorKind::adx()] {
        out = compute_indicator(&out, &spec).unwrap();
    }
    assert_eq!(out.valid_from(0, out.column_index("adx_14").unwrap()), 27);
    assert!(column(&out, "adx_14", 0)[..27].iter().all(|v| *v == 0.0));
    assert_eq!(out.valid_from(0, out.column_index("macd_12_26").unwrap()), 25);
    assert_eq!(out.valid_from(0, out.column_index("macd_signal_12_26_9").unwrap()), 33);
}

#[test]
fn constant_and_monotone_series() {
    let flat = compute_indicator(&from_closes(&[42.0; 60]), &IndicatorKind::macd()).unwrap();
    assert!(column(&flat, "macd_12_26", 0).iter().all(|v| *v == 0.0));
    assert!(column(&flat, "macd_signal_12_26_9", 0).iter().all(|v| *v == 0.0));
    let flat_rsi = compute_indicator(&from_closes(&[42.0; 60]), &IndicatorKind::rsi()).unwrap();
    assert!(column(&flat_rsi, "rsi_14", 0)[14..].iter().all(|v| *v == 50.0));
    let flat_cci = compute_indicator(&from_closes(&[42.0; 60]), &IndicatorKind::cci()).unwrap();
    assert!(column(&flat_cci, "cci_20", 0).iter().all(|v| *v == 0.0));

    let rising: Vec<f64> = (0..60).map(|k| 10.0 + k as f64).collect();
    let up = compute_indicator(&from_closes(&rising), &IndicatorKind::rsi()).unwrap();
    assert!(column(&up, "rsi_14", 0)[14..].iter().all(|v| *v == 100.0));
    let falling: Vec<f64> = (0..60).map(|k| 100.0 - k as f64).collect();
    let down = compute_indicator(&from_closes(&falling), &IndicatorKind::rsi()).unwrap();
    assert!(column(&down, "rsi_14", 0)[14..].iter().all(|v| *v == 0.0));
}

#[test]
fn indicator_errors() {
    let ds = from_closes(&[1.0; 20]);
    assert!(matches!(
        compute_indicator(&ds, &IndicatorKind::Sma { window: 20 }),
        Err(FeatureError::WindowTooLarge { .. })
    ));
    assert!(matches!(compute_indicator(&ds, &IndicatorKind::Sma { window: 0 }), Err(FeatureError::InvalidWindow)));
    let once = compute_indicator(&ds, &IndicatorKind::Sma { window: 3 }).unwrap();
    assert!(matches!(compute_indicator(&once, &IndicatorKind::Sma { window: 3 }), Err(FeatureError::NameCollision(_))));
}

fn scaled(ds: &MarketDataset, c: f64) -> MarketDataset {
    let cols = ds.n_columns();
    let values: Vec<f64> =
        ds.values().iter().enumerate().map(|(i, v)| if i % cols < 4 { v * c } else { *v }).collect();
    MarketDataset::new(ds.timestamps().to_vec(), ds.tickers().to_vec(), ds.columns().to_vec(), values, ds.interval())
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn price_scale_covariance(seed in any::<u64>(), big in any::<bool>()) {
        let c = if big { 10.0 } else { 0.5 };
        let ds = random_ohlc(3, 120, seed, 1.0);
        let sc = scaled(&ds, c);
        let specs = [IndicatorKind::macd(), IndicatorKind::rsi(), IndicatorKind::cci(), IndicatorKind::adx()];
        let (mut a, mut b) = (ds.clone(), sc.clone());
        for s in &specs {
            a = compute_indicator(&a, s).unwrap();
            b = compute_indicator(&b, s).unwrap();
        }
        for n in 0..3 {
            for name in ["rsi_14", "cci_20", "adx_14"] {
                for (x, y) in column(&a, name, n).iter().zip(column(&b, name, n)) {
                    prop_assert!(close_enough(*x, y, 1e-8), "{name}: {x} vs {y}");
                }
            }
            for (x, y) in column(&a, "macd_12_26", n).iter().zip(column(&b, "macd_12_26", n)) {
                prop_assert!((x * c - y).abs() <= 1e-9 * (1.0 + y.abs()) * c);
            }
        }
        let ta = compute_turbulence(&ds, 30).unwrap();
        let tb = compute_turbulence(&sc, 30).unwrap();
        for (x, y) in ta.values.iter().zip(&tb.values) {
            prop_assert!(close_enough(*x, *y, 1e-6));
        }
    }

    #[test]
    fn indicators_are_finite(seed in any::<u64>()) {
        let mut ds = random_ohlc(2, 80, seed, 1.0);
        for s in [IndicatorKind::macd(), IndicatorKind::rsi(), IndicatorKind::cci(), IndicatorKind::adx(),
                  IndicatorKind::Sma { window: 5 }, IndicatorKind::Ema { window: 5 }] {
            ds = compute_indicator(&ds, &s).unwrap();
        }
        prop_assert!(ds.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn turbulence_is_permutation_invariant(seed in any::<u64>()) {
        let ds = random_ohlc(3, 80, seed, 1.0);
        let perm = [2usize, 0, 1];
        let cols = ds.n_columns();
        let mut values = Vec::new();
        for t in 0..ds.n_rows() {
            for &p in &perm {
                values.extend_from_slice(&ds.values()[(t * 3 + p) * cols..(t * 3 + p + 1) * cols]);
            }
        }
        let tickers = perm.iter().map(|p| ds.tickers()[*p].clone()).collect();
        let permuted =
            MarketDataset::new(ds.timestamps().to_vec(), tickers, ds.columns().to_vec(), values, ds.interval()).unwrap();
        let a = compute_turbulence(&ds, 25).unwrap();
        let b = compute_turbulence(&permuted, 25).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!(close_enough(*x, *y, 1e-8));
        }
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|i, j| a[*i][col].abs().total_cmp(&a[*j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for k in col..n {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

#[test]
fn turbulence_matches_explicit_solve_on_gbm() {
    let tickers: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
    let params = GbmParams {
        correlation: vec![1.0, 0.4, 0.2, 0.4, 1.0, 0.3, 0.2, 0.3, 1.0],
        ..GbmParams::uncorrelated(3, 100.0, 0.05, 0.25)
    };
    let ds = align(&[generate_gbm(&params, &tickers, 300, 5).unwrap()]).unwrap();
    let lookback = 60;
    let series = compute_turbulence(&ds, lookback).unwrap();
    let ret = |t: usize, i: usize| ds.close(t, i) / ds.close(t - 1, i) - 1.0;
    for t in lookback..300 {
        let hist: Vec<[f64; 3]> = (t + 1 - lookback..t).map(|k| [ret(k, 0), ret(k, 1), ret(k, 2)]).collect();
        let m = hist.len() as f64;
        let mean: Vec<f64> = (0..3).map(|i| hist.iter().map(|r| r[i]).sum::<f64>() / m).collect();
        let mut cov = vec![vec![0.0; 3]; 3];
        for (i, row) in cov.iter_mut().enumerate() {
            for (j, c) in row.iter_mut().enumerate() {
                *c = hist.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (m - 1.0);
            }
        }
        let eps = 1e-8 * (cov[0][0] + cov[1][1] + cov[2][2]) / 3.0;
        (0..3).for_each(|i| cov[i][i] += eps);
        let dev: Vec<f64> = (0..3).map(|i| ret(t, i) - mean[i]).collect();
        let x = gauss_solve(cov, dev.clone());
        let d: f64 = dev.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!(close_enough(series.values[t], d, 1e-8), "t={t}: {} vs {d}", series.values[t]);
        assert!(series.is_defined(t) && series.values[t] >= 0.0);
    }
    assert!(!series.is_defined(lookback - 1));
    assert!(matches!(compute_turbulence(&ds, 4), Err(FeatureError::LookbackTooShort { .. })));
}

fn day(m: u32, d: u32) -> chrono::DateTime<Utc> {
    Utc.with_ymd_and_hms(2022, m, d, 0, 0, 0).unwrap()
}

/// One ticker with a bar every day from 2022-01-01.
fn daily(n_days: usize) -> MarketDataset {
    let ts = (0..n_days).map(|k| day(1, 1) + Duration::days(k as i64)).collect();
    let cols = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    MarketDataset::new(ts, vec!["X".into()], cols, vec![10.0; n_days * 5], Interval::Day1).unwrap()
}

#[test]
fn sentiment_fill_zero_leads_with_zero() {
    let ds = daily(20);
    let s = ExogenousSeries::market("sentiment", vec![day(1, 10), day(1, 15)], vec![0.7, -0.2]);
    let out = attach_exogenous(&ds, &s, FillPolicy::FillZero, Lag::none()).unwrap();
    let col = column(&out, "sentiment", 0);
    assert!(col[..9].iter().all(|v| *v == 0.0));
    assert_eq!(col[9], 0.7);
    assert_eq!(col[14], -0.2);
    assert_eq!(out.valid_from(0, out.column_index("sentiment").unwrap()), 0);
    let ff = attach_exogenous(&ds, &s, FillPolicy::ForwardFill, Lag::none()).unwrap();
    assert_eq!(ff.valid_from(0, ff.column_index("sentiment").unwrap()), 9);
}

#[test]
fn quarterly_eps_becomes_usable_two_months_later() {
    let ds = daily(365);
    let eps = ExogenousSeries {
        name: "eps".into(),
        tracks: vec![ExogenousTrack { ticker: Some("X".into()), timestamps: vec![day(6, 30)], values: vec![1.25] }],
    };
    let out = attach_exogenous(&ds, &eps, FillPolicy::ForwardFill, Lag::CalendarMonths(2)).unwrap();
    let col = column(&out, "eps", 0);
    let first = col.iter().position(|v| *v != 0.0).unwrap();
    assert_eq!(out.timestamps()[first], day(9, 1));
    assert_eq!(out.valid_from(0, out.column_index("eps").unwrap()), first);
}

#[test]
fn zero_lag_aligned_series_is_copied() {
    let ds = daily(10);
    let vals: Vec<f64> = (0..10).map(|k| k as f64 * 1.5).collect();
    let s = ExogenousSeries::market("vix", ds.timestamps().to_vec(), vals.clone());
    let out = attach_exogenous(&ds, &s, FillPolicy::ForwardFill, Lag::none()).unwrap();
    assert_eq!(column(&out, "vix", 0), vals);
    assert!(matches!(
        attach_exogenous(&out, &s, FillPolicy::ForwardFill, Lag::none()),
        Err(FeatureError::NameCollision(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exogenous_never_reads_ahead(lag_days in 0i64..5, spike_at in 0usize..30) {
        let ds = daily(30);
        let ts: Vec<_> = (0..30).map(|k| day(1, 1) + Duration::days(k as i64) - Duration::hours(6)).collect();
        let base: Vec<f64> = (0..30).map(|k| k as f64).collect();
        let mut spiked = base.clone();
        for v in &mut spiked[spike_at..] {
            *v = 1e9;
        }
        let lag = Lag::Exact(Duration::days(lag_days));
        let a = attach_exogenous(&ds, &ExogenousSeries::market("x", ts.clone(), base), FillPolicy::FillZero, lag).unwrap();
        let b = attach_exogenous(&ds, &ExogenousSeries::market("x", ts.clone(), spiked), FillPolicy::FillZero, lag).unwrap();
        let (ca, cb) = (column(&a, "x", 0), column(&b, "x", 0));
        for t in 0..30 {
            if ds.timestamps()[t] < ts[spike_at] + Duration::days(lag_days) {
                prop_assert_eq!(ca[t], cb[t]);
            }
        }
    }
}

#[test]
fn panel_drops_warmup_and_keeps_declaration_order() {
    let ds = random_ohlc(2, 100, 1, 1.0);
    let panel = build_feature_panel(&ds, &[IndicatorKind::macd(), IndicatorKind::rsi()], &[]).unwrap();
    let warmup = 25 + 8;
    assert_eq!(panel.n_rows(), 100 - warmup);
    assert_eq!(panel.n_columns(), 5 + 3);
    assert_eq!(&panel.columns()[5..], ["macd_12_26", "macd_signal_12_26_9", "rsi_14"]);
    assert_eq!(panel.timestamps()[0], ds.timestamps()[warmup]);
    assert_eq!(panel.first_fully_valid_row(), 0);
    let again = build_feature_panel(&ds, &[IndicatorKind::macd(), IndicatorKind::rsi()], &[]).unwrap();
    assert_eq!(panel, again);

    let vix = ExogenousSeries::market("vix", ds.timestamps().to_vec(), vec![20.0; 100]);
    let spec = ExogenousSpec { series: vix, policy: FillPolicy::ForwardFill, lag: Lag::none() };
    let only_vix = build_feature_panel(&ds, &[], &[spec]).unwrap();
    assert_eq!(only_vix.n_columns(), 6);
    assert_eq!(only_vix.n_rows(), 100);
    assert!(matches!(build_feature_panel(&ds, &[], &[]), Err(FeatureError::NothingToBuild)));
}

#[test]
fn exogenous_csv_groups_by_name_and_ticker() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exo.csv");
    std::fs::write(
        &path,
        "timestamp,name,ticker_or_MARKET,value\n\
2022-01-02T00:00:00Z,vix,MARKET,21.5\n\
2022-01-01T00:00:00Z,vix,MARKET,20\n\
2022-01-01T00:00:00Z,eps,X,1.1\n",
    )
    .unwrap();
    let series = load_exogenous_csv(&path).unwrap();
    assert_eq!(series.len(), 2);
    assert_eq!(series[0].name, "vix");
    assert_eq!(series[0].tracks[0].values, vec![20.0, 21.5]);
    assert_eq!(series[1].tracks[0].ticker.as_deref(), Some("X"));
}
