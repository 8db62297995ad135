use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::marketdata::Interval;

/// Portfolio value over time; `returns()[k]` is the return into bar `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquityCurve {
    timestamps: Vec<DateTime<Utc>>,
    values: Vec<f64>,
}

impl EquityCurve {
    pub fn new(timestamps: Vec<DateTime<Utc>>, values: Vec<f64>) -> Result<Self, EvalError> {
        if values.is_empty() {
            return Err(EvalError::EmptyCurve);
        }
        if timestamps.len() != values.len() {
            return Err(EvalError::InvalidCurve("timestamps and values differ in length".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(EvalError::InvalidCurve("values must be finite and positive".into()));
        }
        Ok(EquityCurve { timestamps, values })
    }

    pub fn timestamps(&self) -> &[DateTime<Utc>] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn returns(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
    }
}

/// `(v_final - v_0) / v_0`.
pub fn cumulative_return(values: &[f64]) -> f64 {
    match (values.first(), values.last()) {
        (Some(v0), Some(v1)) => (v1 - v0) / v0,
        _ => 0.0,
    }
}

/// `(1 + R)^(day_count / t_days) - 1`.
pub fn annualized_return(cumulative: f64, t_days: f64, day_count: f64) -> f64 {
    (1.0 + cumulative).powf(day_count / t_days) - 1.0
}

/// Mean computed about the first sample, so constant input is exact.
fn mean(xs: &[f64]) -> f64 {
    let x0 = xs[0];
    x0 + xs.iter().map(|x| x - x0).sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (`n - 1` denominator); `None` below two points.
pub fn sample_std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    Some((xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt())
}

/// Sample standard deviation of yearly returns.
pub fn annualized_volatility(annual_returns: &[f64]) -> Result<f64, EvalError> {
    sample_std(annual_returns).ok_or(EvalError::TooFewYears { have: annual_returns.len(), need: 2 })
}

/// Returns over consecutive complete blocks of `periods_per_year` periods;
/// a trailing partial year is dropped.
pub fn yearly_returns(values: &[f64], periods_per_year: usize) -> Vec<f64> {
    if periods_per_year == 0 || values.is_empty() {
        return Vec::new();
    }
    let years = (values.len() - 1) / periods_per_year;
    (0..years)
        .map(|y| values[(y + 1) * periods_per_year] / values[y * periods_per_year] - 1.0)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sharpe {
    /// Headline value, scaled by `sqrt(periods_per_year)`.
    pub annualized: f64,
    /// `(mean(R_t) - r_f) / std(R_t)`.
    pub per_period: f64,
}

/// Sharpe ratio of per-period returns with a per-period risk-free rate.
pub fn sharpe_ratio(returns: &[f64], risk_free: f64, periods_per_year: f64) -> Result<Sharpe, EvalError> {
    let std = sample_std(returns).ok_or(EvalError::ZeroVolatility)?;
    if !(std > 0.0) {
        return Err(EvalError::ZeroVolatility);
    }
    let per_period = (mean(returns) - risk_free) / std;
    Ok(Sharpe { annualized: per_period * periods_per_year.sqrt(), per_period })
}

/// Most negative `v_t / max_{s<=t} v_s - 1`; zero for monotone curves.
pub fn max_drawdown(values: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for v in values {
        peak = peak.max(*v);
        worst = worst.min(v / peak - 1.0);
    }
    worst
}

/// `annualized_return / |max_drawdown|`, undefined without a drawdown.
pub fn calmar_ratio(annualized: f64, drawdown: f64) -> Option<f64> {
    (drawdown != 0.0).then(|| annualized / drawdown.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub periods_per_year: f64,
    /// Days per year in the annualization exponent.
    pub day_count: f64,
    /// Length of one period in days, used to turn periods into `t`.
    pub days_per_period: f64,
    /// Per-period risk-free rate.
    pub risk_free_rate: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig { periods_per_year: 252.0, day_count: 365.0, days_per_period: 1.0, risk_free_rate: 0.0 }
    }
}

impl MetricsConfig {
    pub fn for_interval(interval: Interval) -> Self {
        MetricsConfig {
            periods_per_year: interval.periods_per_year(),
            days_per_period: interval.days_per_bar(),
            ..Self::default()
        }
    }
}

/// Metrics of one equity curve. Undefined ratios are `None` and serialize
/// as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cumulative_return: f64,
    pub annualized_return: f64,
    /// Standard deviation of complete-year returns (needs two years).
    pub annualized_volatility: Option<f64>,
    /// `std(R_t) * sqrt(periods_per_year)`.
    pub volatility_scaled: Option<f64>,
    pub sharpe: Option<f64>,
    pub sharpe_per_period: Option<f64>,
    pub calmar: Option<f64>,
    pub max_drawdown: f64,
    pub n_periods: usize,
    pub periods_per_year: f64,
    pub day_count: f64,
    pub risk_free_rate: f64,
}

impl MetricsReport {
    /// The volatility shown in comparison tables: the yearly form when at
    /// least two complete years exist, else the scaled per-period form.
    pub fn headline_volatility(&self) -> Option<f64> {
        self.annualized_volatility.or(self.volatility_scaled)
    }
}

pub fn compute_metrics(values: &[f64], cfg: &MetricsConfig) -> Result<MetricsReport, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyCurve);
    }
    let n_periods = values.len() - 1;
    let returns: Vec<f64> = values.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
    let cumulative = cumulative_return(values);
    let t_days = n_periods as f64 * cfg.days_per_period;
    let annualized = if n_periods == 0 { 0.0 } else { annualized_return(cumulative, t_days, cfg.day_count) };
    let ppy = cfg.periods_per_year.round().max(1.0) as usize;
    let annualized_volatility = annualized_volatility(&yearly_returns(values, ppy)).ok();
    let volatility_scaled = sample_std(&returns).map(|s| s * cfg.periods_per_year.sqrt());
    let sharpe = sharpe_ratio(&returns, cfg.risk_free_rate, cfg.periods_per_year).ok();
    let drawdown = max_drawdown(values);
    Ok(MetricsReport {
        cumulative_return: cumulative,
        annualized_return: annualized,
        annualized_volatility,
        volatility_scaled,
        sharpe: sharpe.map(|s| s.annualized),
        sharpe_per_period: sharpe.map(|s| s.per_period),
        calmar: calmar_ratio(annualized, drawdown),
        max_drawdown: drawdown,
        n_periods,
        periods_per_year: cfg.periods_per_year,
        day_count: cfg.day_count,
        risk_free_rate: cfg.risk_free_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        assert_eq!(cumulative_return(&[100.0, 120.0, 150.0]), 0.5);
        assert_eq!(cumulative_return(&[7.0, 7.0]), 0.0);
        assert_eq!(annualized_return(0.0, 100.0, 365.0), 0.0);
        assert!((annualized_return(0.3, 365.0, 365.0) - 0.3).abs() < 1e-15);
        assert!((annualized_return(0.21, 730.0, 365.0) - 0.1).abs() < 1e-12);
        assert_eq!(annualized_volatility(&[0.2, 0.2, 0.2]).unwrap(), 0.0);
        assert!((annualized_volatility(&[0.1, 0.3]).unwrap() - 0.2 / 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(annualized_volatility(&[0.1]), Err(EvalError::TooFewYears { .. })));
        assert!(matches!(sharpe_ratio(&[0.01; 5], 0.0, 252.0), Err(EvalError::ZeroVolatility)));
        assert_eq!(sharpe_ratio(&[0.1, -0.1, 0.1, -0.1], 0.0, 252.0).unwrap().annualized, 0.0);
        assert_eq!(max_drawdown(&[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(max_drawdown(&[100.0, 50.0, 75.0]), -0.5);
    }
}
