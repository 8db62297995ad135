//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

pub mod ensemble;
pub mod indicators;
pub mod learning;
pub mod optim;

use chrono::{Duration, TimeZone, Utc};
use marketforge::eval::ComparisonRow;
use marketforge::marketdata::{Interval, MarketDataset, BASE_COLUMNS};
use marketforge::seed::stream_rng;
use rand::Rng;

/// Dataset whose OHLC all equal the given closes; `closes[t][i]`.
pub fn dataset_from_closes(closes: &[Vec<f64>]) -> MarketDataset {
    let n = closes[0].len();
    let t0 = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
    let ts = (0..closes.len()).map(|t| t0 + Duration::days(t as i64)).collect();
    let tickers = (0..n).map(|i| format!("A{i}")).collect();
    let mut values = Vec::new();
    for row in closes {
        for c in row {
            values.extend([*c, *c, *c, *c, 1.0]);
        }
    }
    let cols = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    MarketDataset::new(ts, tickers, cols, values, Interval::Day1).unwrap()
}

/// Multiplicative random walk with uniform per-bar moves in `[-amp, amp]`.
pub fn random_walk(n: usize, t: usize, amp: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, 0);
    let mut rows = vec![vec![100.0; n]];
    for k in 1..t {
        let prev = rows[k - 1].clone();
        rows.push(prev.iter().map(|p| p * (1.0 + rng.random_range(-amp..amp))).collect());
    }
    rows
}

/// Random positive equity curve.
pub fn random_curve(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 5);
    let vol = rng.random_range(0.001..0.05);
    let mut v = vec![rng.random_range(1e3..1e7)];
    for _ in 1..len {
        let last = *v.last().unwrap();
        v.push(last * (1.0 + rng.random_range(-vol..vol) + vol * 0.05));
    }
    v
}

pub fn two_pass_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mut sum = 0.0;
    for x in xs {
        sum += x;
    }
    let m = sum / n;
    let mut ss = 0.0;
    for x in xs {
        ss += (x - m) * (x - m);
    }
    (ss / (n - 1.0)).sqrt()
}

/// Drawdown by enumerating every (peak, trough) pair.
pub fn brute_drawdown(v: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..v.len() {
        for j in i..v.len() {
            worst = worst.min(v[j] / v[i] - 1.0);
        }
    }
    worst
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || a == b
}

pub struct MetricOracle {
    pub cumulative: f64,
    pub annualized: f64,
    pub yearly_vol: Option<f64>,
    pub scaled_vol: f64,
    pub sharpe: Option<f64>,
    pub calmar: Option<f64>,
    pub drawdown: f64,
}

/// Direct-definition metrics for daily curves, 365-day count, zero risk-free.
pub fn metric_oracle(v: &[f64]) -> MetricOracle {
    let n = v.len() - 1;
    let cumulative = v[n] / v[0] - 1.0;
    let annualized = (1.0 + cumulative).powf(365.0 / n as f64) - 1.0;
    let rets: Vec<f64> = (1..v.len()).map(|k| v[k] / v[k - 1] - 1.0).collect();
    let years = n / 252;
    let yearly: Vec<f64> = (0..years).map(|y| v[(y + 1) * 252] / v[y * 252] - 1.0).collect();
    let yearly_vol = (yearly.len() >= 2).then(|| two_pass_std(&yearly));
    let sd = two_pass_std(&rets);
    let mean = rets.iter().sum::<f64>() / rets.len() as f64;
    let sharpe = (sd > 0.0).then(|| mean / sd * 252f64.sqrt());
    let drawdown = brute_drawdown(v);
    let calmar = (drawdown != 0.0).then(|| annualized / drawdown.abs());
    MetricOracle { cumulative, annualized, yearly_vol, scaled_vol: sd * 252f64.sqrt(), sharpe, calmar, drawdown }
}

/// Adds a market-wide column holding `per_row[t]` for every ticker.
pub fn with_market_column(ds: &MarketDataset, name: &str, per_row: &[f64]) -> MarketDataset {
    let n = ds.n_tickers();
    let col: Vec<f64> = per_row.iter().flat_map(|v| std::iter::repeat_n(*v, n)).collect();
    ds.with_columns(&[name.to_string()], &[col], &[vec![0; n]]).unwrap()
}

#[derive(Debug, Default)]
pub struct AccountingStats {
    pub steps: usize,
    pub max_rel_err: f64,
    pub negative_states: usize,
}

/// Random-action episodes on a 3-asset random walk, checking per step that
/// `v' - v = h'(p' - p) - costs` and that cash and holdings stay non-negative.
pub fn check_trading_accounting(seed: u64, episodes: usize, bars: usize) -> AccountingStats {
    use marketforge::env::{EnvConfig, EnvState, Environment, TradingEnv};
    use std::sync::Arc;

    let mut stats = AccountingStats::default();
    let mut rng = stream_rng(seed, 9);
    for ep in 0..episodes {
        let data = Arc::new(dataset_from_closes(&random_walk(3, bars, 0.05, seed.wrapping_add(ep as u64))));
        let cfg = EnvConfig { initial_capital: 10_000.0, hmax: 40, ..EnvConfig::default() };
        let mut env = TradingEnv::new(data.clone(), cfg).unwrap();
        env.reset(ep as u64);
        loop {
            let (v0, t) = (env.value(), env.state().t);
            let action: Vec<f64> = (0..3).map(|_| rng.random_range(-1.2..1.2)).collect();
            let step = env.step(&action).unwrap();
            let EnvState::Trading(s) = &step.obs.state else { unreachable!() };
            let gain: f64 = (0..3).map(|i| s.shares[i] as f64 * (data.close(t + 1, i) - data.close(t, i))).sum();
            let err = (step.info.value_after - v0 - (gain - step.info.costs)).abs() / v0.abs().max(1.0);
            stats.max_rel_err = stats.max_rel_err.max(err);
            if s.balance < 0.0 || s.shares.iter().any(|h| *h < 0) {
                stats.negative_states += 1;
            }
            stats.steps += 1;
            if step.done {
                break;
            }
        }
    }
    stats
}

/// Sequential and parallel rollouts of `k` portfolio envs over a random walk
/// with `bars` rows. Returns both trajectories as `(slot, reward, value)`
/// rows and the vectorized-over-sequential throughput ratio.
pub fn vec_and_sequential(k: usize, bars: usize, steps: usize) -> (Vec<(usize, f64, f64)>, Vec<(usize, f64, f64)>, f64) {
    use marketforge::env::{AutoReset, EnvConfig, PortfolioEnv, VecEnv};
    use std::sync::Arc;

    let data = Arc::new(dataset_from_closes(&random_walk(4, bars, 0.03, 77)));
    let make = || PortfolioEnv::new(data.clone(), EnvConfig::default()).unwrap();
    let seeds: Vec<u64> = (0..k as u64).map(|s| 1000 + s).collect();
    let mut rng = stream_rng(4, 4);
    let actions: Vec<Vec<Vec<f64>>> =
        (0..steps).map(|_| (0..k).map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()).collect();

    let mut seq = Vec::new();
    let seq_start = std::time::Instant::now();
    for slot in 0..k {
        let mut env = AutoReset::new(make());
        env.reset(seeds[slot]);
        for step in actions.iter() {
            let r = env.step(&step[slot]).unwrap();
            seq.push((slot, r.result.reward, r.result.info.value_after));
        }
    }
    let seq_time = seq_start.elapsed().as_secs_f64();

    let mut venv = VecEnv::new((0..k).map(|_| make()).collect());
    venv.vec_reset(&seeds).unwrap();
    let mut par = vec![Vec::new(); k];
    let par_start = std::time::Instant::now();
    for step in actions.iter() {
        let out = venv.vec_step(step).unwrap();
        for (slot, r) in out.results.iter().enumerate() {
            par[slot].push((slot, r.result.reward, r.result.info.value_after));
        }
    }
    let par_time = par_start.elapsed().as_secs_f64().max(1e-9);
    (seq, par.concat(), seq_time / par_time)
}

/// Closed-form shortfall of a liquidation schedule `n` (shares per period)
/// with no noise: `sum_k n_k (gamma * sold_before_k + eps * [n_k > 0] + eta/tau * n_k)`.
pub fn closed_form_shortfall(n: &[f64], gamma: f64, eta: f64, eps: f64, tau: f64) -> f64 {
    let mut before = 0.0;
    let mut total = 0.0;
    for q in n {
        let fixed = if *q > 0.0 { eps } else { 0.0 };
        total += q * (gamma * before + fixed + eta / tau * q);
        before += q;
    }
    total
}

/// Every 5-period schedule whose first four sales are multiples of `X/20`,
/// the last period selling the remainder.
pub fn five_period_schedules(x: f64) -> Vec<[f64; 5]> {
    let mut out = Vec::new();
    for a in 0..=20 {
        for b in 0..=20 - a {
            for c in 0..=20 - a - b {
                for d in 0..=20 - a - b - c {
                    let e = 20 - a - b - c - d;
                    out.push([a, b, c, d, e].map(|k| k as f64 * x / 20.0));
                }
            }
        }
    }
    out
}

/// The published comparison rows, used by the table renderer fixture.
pub fn reference_rows() -> Vec<ComparisonRow> {
    let cols = [
        ("Ensemble", 0.259, 0.159, 1.53, 2.27, -0.114),
        ("A2C", 0.233, 0.162, 1.37, 1.97, -0.118),
        ("PPO", 0.131, 0.134, 0.99, 0.88, -0.149),
        ("DDPG", 0.127, 0.150, 0.88, 0.85, -0.149),
        ("DJIA index", 0.197, 0.144, 1.32, 1.74, -0.113),
    ];
    cols.iter()
        .map(|(name, r, v, s, c, d)| ComparisonRow {
            name: name.to_string(),
            annual_return: Some(*r),
            annual_volatility: Some(*v),
            sharpe: Some(*s),
            calmar: Some(*c),
            max_drawdown: Some(*d),
            n_periods: 440,
        })
        .collect()
}
