//! Performance metrics, the backtest engine and comparison reports.

mod backtest;
mod metrics;
mod report;

pub use backtest::{backtest, BacktestResult, TradeRecord};
pub use metrics::{
    annualized_return, annualized_volatility, calmar_ratio, compute_metrics, cumulative_return, max_drawdown,
    sample_std, sharpe_ratio, yearly_returns, EquityCurve, MetricsConfig, MetricsReport, Sharpe,
};
pub use report::{compare, read_curve_csv, write_curve_csv, Comparison, ComparisonRow};

use thiserror::Error;

use crate::agents::AgentError;
use crate::env::EnvError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("returns have zero volatility; the ratio is undefined")]
    ZeroVolatility,
    #[error("need at least {need} complete years, have {have}")]
    TooFewYears { have: usize, need: usize },
    #[error("equity curve is empty")]
    EmptyCurve,
    #[error("invalid equity curve: {0}")]
    InvalidCurve(String),
    #[error("nothing to compare")]
    NothingToCompare,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("bad curve file: {0}")]
    BadFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
