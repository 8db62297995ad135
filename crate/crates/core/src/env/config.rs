use serde::{Deserialize, Serialize};

use super::EnvError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    DeltaValue,
    LogReturn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskIndicator {
    None,
    /// Reads the market-wide `turbulence` column.
    Turbulence,
    /// Reads the market-wide `vix` column.
    Vix,
}

impl RiskIndicator {
    pub fn column(self) -> Option<&'static str> {
        match self {
            RiskIndicator::None => None,
            RiskIndicator::Turbulence => Some(crate::features::TURBULENCE_COLUMN),
            RiskIndicator::Vix => Some("vix"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub initial_capital: f64,
    pub hmax: u32,
    pub cost_rate: f64,
    pub reward_kind: RewardKind,
    pub reward_scale: f64,
    pub risk_indicator: RiskIndicator,
    pub risk_threshold: f64,
    pub allow_short: bool,
    pub allow_margin: bool,
    pub gamma: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            initial_capital: 1_000_000.0,
            hmax: 100,
            cost_rate: 0.001,
            reward_kind: RewardKind::DeltaValue,
            reward_scale: 1e-4,
            risk_indicator: RiskIndicator::None,
            risk_threshold: f64::INFINITY,
            allow_short: false,
            allow_margin: false,
            gamma: 0.99,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::InvalidConfig(m.to_string()));
        if !(self.initial_capital.is_finite() && self.initial_capital > 0.0) {
            return bad("initial_capital must be positive");
        }
        if self.hmax < 1 {
            return bad("hmax must be at least 1");
        }
        if !(0.0..=0.1).contains(&self.cost_rate) {
            return bad("cost_rate must lie in [0, 0.1]");
        }
        if !(self.reward_scale > 0.0) {
            return bad("reward_scale must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        Ok(())
    }
}
