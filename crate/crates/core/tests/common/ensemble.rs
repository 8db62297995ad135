//! Planted candidates and regime-switching fixtures for ensemble tests.

use std::sync::Arc;

use marketforge::agents::{ConstantPolicy, Policy};
use marketforge::env::EnvConfig;
use marketforge::eval::MetricsConfig;
use marketforge::marketdata::MarketDataset;
use marketforge::pipeline::{Candidate, EnvKind, EnvSpec, PipelineError, RunSetup, SliceContext};

use super::dataset_from_closes;

/// Portfolio scores holding everything in `asset` (or cash when `None`).
pub fn hold(name: &str, asset: Option<usize>) -> Candidate {
    Candidate::new(name, 0, move |ctx: &SliceContext| -> Result<Box<dyn Policy>, PipelineError> {
        let mut a = vec![f64::NEG_INFINITY; ctx.action_dim];
        a[asset.unwrap_or(ctx.action_dim - 1)] = 0.0;
        Ok(Box::new(ConstantPolicy::new(a)))
    })
}

/// Two assets; per bar A moves by +2%/0% alternately in up regimes and
/// -2%/0% in down regimes, B the mirror image. `up_a(t)` picks the regime.
pub fn regime_data(n: usize, up_a: impl Fn(usize) -> bool) -> MarketDataset {
    let mut rows = vec![vec![100.0, 100.0]];
    for t in 1..n {
        let m = if t % 2 == 0 { 0.02 } else { 0.0 };
        let (ga, gb) = if up_a(t) { (1.0 + m, 1.0 - m) } else { (1.0 - m, 1.0 + m) };
        let p = &rows[t - 1];
        rows.push(vec![p[0] * ga, p[1] * gb]);
    }
    dataset_from_closes(&rows)
}

pub fn setup(data: MarketDataset) -> RunSetup {
    let config = EnvConfig { initial_capital: 1000.0, cost_rate: 0.0, ..EnvConfig::default() };
    RunSetup {
        data: Arc::new(data),
        env: EnvSpec { kind: EnvKind::Portfolio, config },
        metrics: MetricsConfig::default(),
        seed: 7,
    }
}
