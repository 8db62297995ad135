use std::io::Write;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::agents::Policy;
use crate::env::Environment;
use crate::eval::{compute_metrics, BacktestResult, EquityCurve, MetricsConfig, MetricsReport, TradeRecord};

/// Metrics of the curve prefix up to `bar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySnapshot {
    pub bar: usize,
    pub timestamp: DateTime<Utc>,
    pub value: f64,
    pub metrics: MetricsReport,
}

/// Paper-trading replay: steps `env` bar by bar with the frozen policy and
/// writes one JSON line to `out` every `report_every` bars and after the
/// final bar. The returned result equals a plain backtest.
pub fn walk_forward_replay<P, E, W>(
    name: &str,
    policy: &mut P,
    env: &mut E,
    seed: u64,
    cfg: &MetricsConfig,
    report_every: usize,
    mut out: W,
) -> Result<(BacktestResult, Vec<ReplaySnapshot>), PipelineError>
where
    P: Policy + ?Sized,
    E: Environment + ?Sized,
    W: Write,
{
    if report_every == 0 {
        return Err(PipelineError::Config("report_every must be positive".into()));
    }
    policy.begin_episode();
    let mut obs = env.reset(seed);
    let mut timestamps = vec![env.timestamp()];
    let mut values = vec![env.value()];
    let mut trades = Vec::new();
    let mut snapshots = Vec::new();
    loop {
        let stamp = env.timestamp();
        let action = policy.act(&obs, false);
        let res = env.step(&action)?;
        trades.push(TradeRecord {
            timestamp: stamp,
            action,
            trades: res.info.trades.clone(),
            costs: res.info.costs,
            risk_triggered: res.info.risk_triggered,
        });
        timestamps.push(env.timestamp());
        values.push(env.value());
        let bar = values.len() - 1;
        if bar % report_every == 0 || res.done {
            let snap = ReplaySnapshot {
                bar,
                timestamp: env.timestamp(),
                value: env.value(),
                metrics: compute_metrics(&values, cfg)?,
            };
            serde_json::to_writer(&mut out, &snap).map_err(std::io::Error::other)?;
            out.write_all(b"\n")?;
            snapshots.push(snap);
        }
        if res.done {
            break;
        }
        obs = res.obs;
    }
    out.flush()?;
    let curve = EquityCurve::new(timestamps, values)?;
    let metrics = compute_metrics(curve.values(), cfg)?;
    let result =
        BacktestResult { name: name.to_string(), curve, metrics, trades, config: serde_json::Value::Null, seed };
    Ok((result, snapshots))
}
