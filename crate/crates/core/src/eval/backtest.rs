use chrono::{DateTime, Utc};
use serde::Serialize;

use super::{compute_metrics, EquityCurve, EvalError, MetricsConfig, MetricsReport};
use crate::agents::Policy;
use crate::env::Environment;

/// One executed step of a backtest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeRecord {
    pub timestamp: DateTime<Utc>,
    pub action: Vec<f64>,
    /// Executed share deltas or target weights, as reported by the env.
    pub trades: Vec<f64>,
    pub costs: f64,
    pub risk_triggered: bool,
}

#[derive(Debug, Clone)]
pub struct BacktestResult {
    pub name: String,
    pub curve: EquityCurve,
    pub metrics: MetricsReport,
    pub trades: Vec<TradeRecord>,
    pub config: serde_json::Value,
    pub seed: u64,
}

impl BacktestResult {
    /// Recomputes the metrics from the stored curve.
    pub fn recompute(&self, cfg: &MetricsConfig) -> Result<MetricsReport, EvalError> {
        compute_metrics(self.curve.values(), cfg)
    }
}

/// Runs one full greedy episode and scores its equity curve.
pub fn backtest<P, E>(
    name: &str,
    policy: &mut P,
    env: &mut E,
    seed: u64,
    cfg: &MetricsConfig,
) -> Result<BacktestResult, EvalError>
where
    P: Policy + ?Sized,
    E: Environment + ?Sized,
{
    policy.begin_episode();
    let mut obs = env.reset(seed);
    let mut timestamps = vec![env.timestamp()];
    let mut values = vec![env.value()];
    let mut trades = Vec::new();
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
        if res.done {
            break;
        }
        obs = res.obs;
    }
    let curve = EquityCurve::new(timestamps, values)?;
    let metrics = compute_metrics(curve.values(), cfg)?;
    Ok(BacktestResult { name: name.to_string(), curve, metrics, trades, config: serde_json::Value::Null, seed })
}
