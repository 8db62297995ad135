use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::candidates::{Candidate, EnvKind, EnvSpec, Role, SliceContext};
use super::split::{parse_instant, RollingWindowSpec, SplitSpec};
use super::PipelineError;
use crate::agents::{A2cAgent, A2cConfig, ActionSpace, ConstantPolicy, DqnAgent, DqnConfig, Policy, RandomPolicy};
use crate::env::EnvConfig;
use crate::eval::MetricsConfig;
use crate::features::{FillPolicy, IndicatorSpec};
use crate::marketdata::Interval;
use crate::strategies::{equal_weight, passive_hold, rebalancing_policy, OptimizerConfig, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Gbm,
    Csv,
    Binary,
    Http,
}

/// `[data]`: where bars come from. Fields irrelevant to `source` are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    #[serde(default)]
    pub tickers: Vec<String>,
    #[serde(default = "default_interval")]
    pub interval: Interval,
    /// GBM: number of bars.
    #[serde(default)]
    pub bars: usize,
    /// GBM: timestamp of the first bar. HTTP: request start.
    #[serde(default, deserialize_with = "opt_instant")]
    pub start: Option<DateTime<Utc>>,
    /// HTTP: request end.
    #[serde(default, deserialize_with = "opt_instant")]
    pub end: Option<DateTime<Utc>>,
    /// GBM parameters; a single entry applies to every ticker.
    #[serde(default = "default_s0")]
    pub s0: Vec<f64>,
    #[serde(default = "default_zero")]
    pub mu: Vec<f64>,
    #[serde(default = "default_sigma")]
    pub sigma: Vec<f64>,
    /// Row-major correlation; identity when omitted.
    #[serde(default)]
    pub correlation: Option<Vec<f64>>,
    /// CSV files (one per source) or the binary dataset path.
    #[serde(default)]
    pub paths: Vec<PathBuf>,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub auth_token: Option<String>,
    #[serde(default)]
    pub rate_limit: Option<f64>,
    #[serde(default)]
    pub max_retries: Option<u32>,
}

fn opt_instant<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<DateTime<Utc>>, D::Error> {
    let s = Option::<String>::deserialize(d)?;
    s.map(|s| parse_instant(&s).map_err(serde::de::Error::custom)).transpose()
}

fn default_interval() -> Interval {
    Interval::Day1
}
fn default_s0() -> Vec<f64> {
    vec![100.0]
}
fn default_zero() -> Vec<f64> {
    vec![0.0]
}
fn default_sigma() -> Vec<f64> {
    vec![0.2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExogenousConfig {
    pub path: PathBuf,
    #[serde(default = "default_fill")]
    pub policy: FillPolicy,
    /// Publication lag in days.
    #[serde(default)]
    pub lag_days: Option<i64>,
    /// Publication lag in calendar months after the datum's date.
    #[serde(default)]
    pub lag_months: Option<u32>,
}

fn default_fill() -> FillPolicy {
    FillPolicy::ForwardFill
}

/// `[features]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub indicators: Vec<IndicatorSpec>,
    pub turbulence_lookback: Option<usize>,
    pub exogenous: Vec<ExogenousConfig>,
}

/// `[eval]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub day_count: f64,
    /// Per-period risk-free rate.
    pub risk_free_rate: f64,
    /// Top-left cell of the text report.
    pub title: Option<String>,
    /// Bars between walk-forward snapshots in `backtest`.
    pub report_every: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { day_count: 365.0, risk_free_rate: 0.0, title: None, report_every: None }
    }
}

impl EvalConfig {
    pub fn metrics(&self, interval: Interval) -> MetricsConfig {
        MetricsConfig { day_count: self.day_count, risk_free_rate: self.risk_free_rate, ..MetricsConfig::for_interval(interval) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgentKind {
    Dqn(DqnConfig),
    A2c(A2cConfig),
    Random,
    Constant { action: Vec<f64> },
    EqualWeight,
    PassiveHold { weights: Option<Vec<f64>> },
    MeanVariance { optimizer: OptimizerConfig, window: usize, every: Option<usize> },
}

/// `[agents.<name>]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub kind: AgentKind,
    pub steps: usize,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub features: FeatureConfig,
    pub env: EnvSpec,
    /// Registration order is file order.
    pub agents: IndexMap<String, AgentSpec>,
    pub split: Option<SplitSpec>,
    pub rolling: Option<RollingWindowSpec>,
    pub eval: EvalConfig,
    /// Directory relative paths resolve against.
    pub base_dir: PathBuf,
}

fn cfg_err(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Config(e.to_string())
}

fn take<T: serde::de::DeserializeOwned>(table: &mut toml::Table, key: &str) -> Result<Option<T>, PipelineError> {
    table
        .remove(key)
        .map(|v| v.try_into().map_err(|e| PipelineError::Config(format!("`{key}`: {e}"))))
        .transpose()
}

fn rest<T: serde::de::DeserializeOwned>(table: toml::Table, what: &str) -> Result<T, PipelineError> {
    toml::Value::Table(table).try_into().map_err(|e| PipelineError::Config(format!("{what}: {e}")))
}

fn parse_agent(name: &str, mut t: toml::Table) -> Result<AgentSpec, PipelineError> {
    let kind: String = take(&mut t, "kind")?.ok_or_else(|| cfg_err(format!("agent `{name}` needs a kind")))?;
    let steps: usize = take(&mut t, "steps")?.unwrap_or(0);
    let role: Role = take(&mut t, "role")?.unwrap_or_default();
    let what = format!("agent `{name}`");
    let kind = match kind.as_str() {
        "dqn" => AgentKind::Dqn(rest(t, &what)?),
        "a2c" => AgentKind::A2c(rest(t, &what)?),
        "random" => {
            ensure_empty(&t, &what)?;
            AgentKind::Random
        }
        "constant" => {
            let action = take(&mut t, "action")?.ok_or_else(|| cfg_err(format!("{what} needs `action`")))?;
            ensure_empty(&t, &what)?;
            AgentKind::Constant { action }
        }
        "equal_weight" => {
            ensure_empty(&t, &what)?;
            AgentKind::EqualWeight
        }
        "passive_hold" => {
            let weights = take(&mut t, "weights")?;
            ensure_empty(&t, &what)?;
            AgentKind::PassiveHold { weights }
        }
        "mean_variance" | "min_variance" => {
            let window = take(&mut t, "window")?.unwrap_or(252);
            let every: Option<usize> = take(&mut t, "every")?.or(Some(21));
            let every = every.filter(|k| *k > 0);
            let mut optimizer: OptimizerConfig = rest(t, &what)?;
            if kind == "min_variance" {
                optimizer.objective = crate::strategies::Objective::MinVariance;
            }
            AgentKind::MeanVariance { optimizer, window, every }
        }
        other => return Err(cfg_err(format!("{what}: unknown kind `{other}`"))),
    };
    Ok(AgentSpec { kind, steps, role })
}

fn ensure_empty(t: &toml::Table, what: &str) -> Result<(), PipelineError> {
    match t.keys().next() {
        Some(k) => Err(cfg_err(format!("{what}: unknown key `{k}`"))),
        None => Ok(()),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let mut root: toml::Table = text.parse().map_err(cfg_err)?;
        let seed: u64 = take(&mut root, "seed")?.ok_or_else(|| cfg_err("top-level `seed` is required"))?;
        let data: DataConfig = take(&mut root, "data")?.ok_or_else(|| cfg_err("missing [data]"))?;
        let features: FeatureConfig = take(&mut root, "features")?.unwrap_or_default();
        let mut env_table: toml::Table = take(&mut root, "env")?.unwrap_or_default();
        let kind: EnvKind = take(&mut env_table, "kind")?.unwrap_or(EnvKind::Portfolio);
        let config: EnvConfig = rest(env_table, "[env]")?;
        config.validate().map_err(cfg_err)?;
        let agents_table: toml::Table = take(&mut root, "agents")?.ok_or_else(|| cfg_err("missing [agents]"))?;
        let mut agents = IndexMap::new();
        for (name, v) in agents_table {
            let t = match v {
                toml::Value::Table(t) => t,
                _ => return Err(cfg_err(format!("[agents.{name}] must be a table"))),
            };
            agents.insert(name.clone(), parse_agent(&name, t)?);
        }
        let split: Option<SplitSpec> = take(&mut root, "split")?;
        let rolling: Option<RollingWindowSpec> = take(&mut root, "rolling")?;
        let eval: EvalConfig = take(&mut root, "eval")?.unwrap_or_default();
        if let Some(k) = root.keys().next() {
            return Err(cfg_err(format!("unknown top-level key `{k}`")));
        }
        let cfg = RunConfig { seed, data, features, env: EnvSpec { kind, config }, agents, split, rolling, eval, base_dir: base_dir.into() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.agents.is_empty() {
            return Err(cfg_err("no agents configured"));
        }
        if !self.agents.values().any(|a| a.role == Role::Candidate) {
            return Err(cfg_err("at least one agent must have role = \"candidate\""));
        }
        match (&self.split, &self.rolling) {
            (None, None) => return Err(cfg_err("one of [split] or [rolling] is required")),
            (Some(_), Some(_)) => return Err(cfg_err("[split] and [rolling] are mutually exclusive")),
            (Some(s), None) => s.validate()?,
            (None, Some(r)) => r.validate()?,
        }
        for (name, a) in &self.agents {
            let needs_portfolio = matches!(
                a.kind,
                AgentKind::EqualWeight | AgentKind::PassiveHold { .. } | AgentKind::MeanVariance { .. }
            );
            if needs_portfolio && self.env.kind != EnvKind::Portfolio {
                return Err(cfg_err(format!("agent `{name}` needs env kind \"portfolio\"")));
            }
            if let AgentKind::MeanVariance { optimizer, .. } = &a.kind {
                optimizer.validate().map_err(cfg_err)?;
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Candidates in registration order.
    pub fn candidates(&self) -> Vec<Candidate> {
        self.agents
            .iter()
            .map(|(name, spec)| Candidate {
                name: name.clone(),
                role: spec.role,
                steps: spec.steps,
                factory: Arc::new(spec.factory()),
            })
            .collect()
    }
}

impl AgentSpec {
    pub fn factory(&self) -> impl Fn(&SliceContext) -> Result<Box<dyn Policy>, PipelineError> + Send + Sync + 'static {
        let kind = self.kind.clone();
        move |ctx: &SliceContext| -> Result<Box<dyn Policy>, PipelineError> {
            let n = ctx.n_assets();
            let grid_assets = ctx.action_dim;
            Ok(match &kind {
                AgentKind::Dqn(cfg) => {
                    let space = ActionSpace::Grid { n_assets: grid_assets, levels: cfg.action_levels.clone() };
                    Box::new(DqnAgent::new(ctx.obs_dim, space, cfg.clone(), ctx.seed)?)
                }
                AgentKind::A2c(cfg) => {
                    Box::new(A2cAgent::new(ctx.obs_dim, ActionSpace::Continuous(ctx.action_dim), cfg.clone(), ctx.seed)?)
                }
                AgentKind::Random => Box::new(RandomPolicy::new(ActionSpace::Continuous(ctx.action_dim), ctx.seed)),
                AgentKind::Constant { action } => {
                    if action.len() != ctx.action_dim {
                        return Err(cfg_err(format!("constant action has {} entries, env expects {}", action.len(), ctx.action_dim)));
                    }
                    Box::new(ConstantPolicy::new(action.clone()))
                }
                AgentKind::EqualWeight => Box::new(equal_weight(n)),
                AgentKind::PassiveHold { weights } => {
                    let w = match weights {
                        Some(w) if w.len() == n => WeightVector::from_assets(w)?,
                        Some(w) => WeightVector::new(w.clone())?,
                        None => WeightVector::equal(n),
                    };
                    if w.n_assets() != n {
                        return Err(cfg_err("passive_hold weights do not match the ticker count"));
                    }
                    Box::new(passive_hold(w))
                }
                AgentKind::MeanVariance { optimizer, window, every } => Box::new(rebalancing_policy(
                    ctx.data.clone(),
                    ctx.rows.start,
                    optimizer.clone(),
                    *window,
                    *every,
                )?),
            })
        }
    }
}
