//! Python bindings: datasets, features, environments, agents, optimizers,
//! metrics and the ensemble pipeline.

use std::path::PathBuf;
use std::sync::Arc;

use marketforge::agents::{
    train_agent, A2cAgent, A2cConfig, ActionSpace, DqnAgent, DqnConfig, Policy, RandomPolicy,
};
use marketforge::env::{
    EnvConfig, Environment, FeatureNormalizer, LiquidationConfig, LiquidationEnv as CoreLiquidationEnv, StepResult,
};
use marketforge::eval::{backtest, compute_metrics, Comparison, MetricsConfig};
use marketforge::features::{attach_turbulence, compute_indicator, IndicatorKind};
use marketforge::marketdata::{
    align, generate_gbm, load_csv, read_dataset, write_dataset, write_dataset_csv, format_timestamp, GbmParams, Interval,
    MarketDataset,
};
use marketforge::pipeline::{load_panel, run_ensemble_job, EnvKind, EnvSpec, RunConfig};
use marketforge::strategies::{mean_variance_optimize, min_variance_optimize, project_to_simplex, MomentEstimate, OptimizerConfig};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};
use serde::de::DeserializeOwned;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Python object -> JSON text via the `json` module.
fn dumps(py: Python<'_>, obj: Option<&Bound<'_, PyDict>>) -> PyResult<String> {
    match obj {
        None => Ok("{}".into()),
        Some(d) => py.import("json")?.call_method1("dumps", (d,))?.extract(),
    }
}

fn loads<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// Deserializes a config struct from keyword arguments.
fn from_kwargs<T: DeserializeOwned>(py: Python<'_>, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<T> {
    serde_json::from_str(&dumps(py, kwargs)?).map_err(value_err)
}

/// Aligned OHLCV panel with optional feature columns.
#[pyclass(name = "Dataset", module = "marketforge", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: Arc<MarketDataset>,
}

impl PyDataset {
    fn wrap(ds: MarketDataset) -> Self {
        PyDataset { inner: Arc::new(ds) }
    }
}

#[pymethods]
impl PyDataset {
    /// Synthetic geometric Brownian motion prices, one path per ticker.
    #[staticmethod]
    #[pyo3(signature = (tickers, bars, seed, s0 = 100.0, mu = 0.0, sigma = 0.2))]
    fn gbm(tickers: Vec<String>, bars: usize, seed: u64, s0: f64, mu: f64, sigma: f64) -> PyResult<Self> {
        let params = GbmParams::uncorrelated(tickers.len(), s0, mu, sigma);
        let raw = generate_gbm(&params, &tickers, bars, seed).map_err(value_err)?;
        Ok(Self::wrap(align(&[raw]).map_err(value_err)?))
    }

    #[staticmethod]
    #[pyo3(signature = (path, interval = "1d"))]
    fn from_csv(path: PathBuf, interval: &str) -> PyResult<Self> {
        let interval: Interval = serde_json::from_value(interval.into()).map_err(value_err)?;
        let raw = load_csv(&path, interval).map_err(value_err)?;
        Ok(Self::wrap(align(&[raw]).map_err(value_err)?))
    }

    /// Reads the binary dataset format.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self::wrap(read_dataset(std::io::BufReader::new(std::fs::File::open(path).map_err(value_err)?)).map_err(value_err)?))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let file = std::fs::File::create(path).map_err(runtime_err)?;
        write_dataset(&self.inner, std::io::BufWriter::new(file)).map_err(runtime_err)
    }

    fn to_csv(&self, path: PathBuf) -> PyResult<()> {
        let file = std::fs::File::create(path).map_err(runtime_err)?;
        write_dataset_csv(&self.inner, file).map_err(runtime_err)
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn tickers(&self) -> Vec<String> {
        self.inner.tickers().to_vec()
    }

    #[getter]
    fn columns(&self) -> Vec<String> {
        self.inner.columns().to_vec()
    }

    #[getter]
    fn timestamps(&self) -> Vec<String> {
        self.inner.timestamps().iter().map(format_timestamp).collect()
    }

    /// Close prices as `rows x tickers`.
    fn closes(&self) -> Vec<Vec<f64>> {
        (0..self.inner.n_rows()).map(|t| self.inner.closes_at(t)).collect()
    }

    /// One column for one ticker over all rows.
    fn column(&self, name: &str, ticker: usize) -> PyResult<Vec<f64>> {
        let f = self.inner.column_index(name).ok_or_else(|| value_err(format!("no column `{name}`")))?;
        if ticker >= self.inner.n_tickers() {
            return Err(value_err(format!("ticker index {ticker} out of range")));
        }
        Ok(self.inner.series(ticker, f))
    }

    /// Adds an indicator, e.g. `with_indicator("rsi", window=14)`.
    #[pyo3(signature = (kind, **params))]
    fn with_indicator(&self, py: Python<'_>, kind: &str, params: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut spec: serde_json::Value = serde_json::from_str(&dumps(py, params)?).map_err(value_err)?;
        spec["kind"] = kind.into();
        let spec: IndicatorKind = serde_json::from_value(spec).map_err(value_err)?;
        Ok(Self::wrap(compute_indicator(&self.inner, &spec).map_err(value_err)?))
    }

    fn with_turbulence(&self, lookback: usize) -> PyResult<Self> {
        Ok(Self::wrap(attach_turbulence(&self.inner, lookback).map_err(value_err)?))
    }

    /// Rows `start..end`.
    fn slice(&self, start: usize, end: usize) -> PyResult<Self> {
        Ok(Self::wrap(self.inner.slice_rows(start..end).map_err(value_err)?))
    }

    fn __len__(&self) -> usize {
        self.inner.n_rows()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(rows={}, tickers={:?}, columns={})",
            self.inner.n_rows(),
            self.inner.tickers(),
            self.inner.n_columns()
        )
    }
}

fn step_tuple<'py>(py: Python<'py>, r: &StepResult) -> PyResult<(Vec<f64>, f64, bool, Bound<'py, PyDict>)> {
    let info = PyDict::new(py);
    info.set_item("trades", r.info.trades.clone())?;
    info.set_item("costs", r.info.costs)?;
    info.set_item("risk_triggered", r.info.risk_triggered)?;
    info.set_item("value_before", r.info.value_before)?;
    info.set_item("value_after", r.info.value_after)?;
    Ok((r.obs.vector.clone(), r.reward, r.done, info))
}

/// Trading (`kind="trading"`) or portfolio (`kind="portfolio"`) environment
/// over a dataset. Keyword arguments set the env config fields.
#[pyclass(name = "Env", module = "marketforge", unsendable)]
struct PyEnv {
    inner: Box<dyn Environment>,
    kind: EnvKind,
}

#[pymethods]
impl PyEnv {
    #[new]
    #[pyo3(signature = (dataset, kind = "portfolio", **config))]
    fn new(py: Python<'_>, dataset: &PyDataset, kind: &str, config: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let kind = match kind {
            "trading" => EnvKind::Trading,
            "portfolio" => EnvKind::Portfolio,
            other => return Err(value_err(format!("unknown env kind `{other}`"))),
        };
        let config: EnvConfig = from_kwargs(py, config)?;
        config.validate().map_err(value_err)?;
        let data = &dataset.inner;
        let norm = FeatureNormalizer::fit(data);
        let capital = config.initial_capital;
        let inner = EnvSpec { kind, config }.build(data, 0..data.n_rows(), &norm, capital).map_err(value_err)?;
        Ok(PyEnv { inner, kind })
    }

    #[pyo3(signature = (seed = 0))]
    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.inner.reset(seed).vector
    }

    /// Returns `(observation, reward, done, info)`.
    fn step<'py>(&mut self, py: Python<'py>, action: Vec<f64>) -> PyResult<(Vec<f64>, f64, bool, Bound<'py, PyDict>)> {
        let r = self.inner.step(&action).map_err(value_err)?;
        step_tuple(py, &r)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.kind {
            EnvKind::Trading => "trading",
            EnvKind::Portfolio => "portfolio",
        }
    }

    #[getter]
    fn value(&self) -> f64 {
        self.inner.value()
    }

    #[getter]
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    #[getter]
    fn action_dim(&self) -> usize {
        self.inner.action_dim()
    }

    #[getter]
    fn done(&self) -> bool {
        self.inner.is_done()
    }

    fn observation(&self) -> Vec<f64> {
        self.inner.observation().vector
    }
}

/// Almgren-Chriss liquidation of one stock by one or two agents.
#[pyclass(name = "LiquidationEnv", module = "marketforge", unsendable)]
struct PyLiquidationEnv {
    inner: CoreLiquidationEnv,
}

#[pymethods]
impl PyLiquidationEnv {
    #[new]
    #[pyo3(signature = (**config))]
    fn new(py: Python<'_>, config: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let cfg: LiquidationConfig = from_kwargs(py, config)?;
        Ok(PyLiquidationEnv { inner: CoreLiquidationEnv::new(cfg).map_err(value_err)? })
    }

    /// Returns the remaining inventory per agent.
    #[pyo3(signature = (seed = 0))]
    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.inner.reset(seed).remaining
    }

    /// Returns `(remaining, rewards, done)`.
    fn step(&mut self, fractions: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>, bool)> {
        let s = self.inner.step(&fractions).map_err(value_err)?;
        Ok((s.state.remaining, s.rewards, s.done))
    }

    #[getter]
    fn price(&self) -> f64 {
        self.inner.state().price
    }

    #[getter]
    fn shortfall(&self) -> f64 {
        self.inner.shortfall()
    }
}

/// A learning or fixed policy bound to an environment's shapes.
#[pyclass(name = "Agent", module = "marketforge", unsendable)]
struct PyAgent {
    inner: Box<dyn Policy>,
}

#[pymethods]
impl PyAgent {
    /// Deep Q-network choosing one of `action_levels` per asset; keyword
    /// arguments set the DQN config fields.
    #[staticmethod]
    #[pyo3(signature = (env, seed, **config))]
    fn dqn(py: Python<'_>, env: &PyEnv, seed: u64, config: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let cfg: DqnConfig = from_kwargs(py, config)?;
        let space = ActionSpace::Grid { n_assets: env.inner.action_dim(), levels: cfg.action_levels.clone() };
        let agent = DqnAgent::new(env.inner.obs_dim(), space, cfg, seed).map_err(value_err)?;
        Ok(PyAgent { inner: Box::new(agent) })
    }

    /// Advantage actor-critic with a Gaussian policy.
    #[staticmethod]
    #[pyo3(signature = (env, seed, **config))]
    fn a2c(py: Python<'_>, env: &PyEnv, seed: u64, config: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let cfg: A2cConfig = from_kwargs(py, config)?;
        let space = ActionSpace::Continuous(env.inner.action_dim());
        let agent = A2cAgent::new(env.inner.obs_dim(), space, cfg, seed).map_err(value_err)?;
        Ok(PyAgent { inner: Box::new(agent) })
    }

    #[staticmethod]
    fn random(env: &PyEnv, seed: u64) -> Self {
        let space = ActionSpace::Continuous(env.inner.action_dim());
        PyAgent { inner: Box::new(RandomPolicy::new(space, seed)) }
    }

    /// Trains for `steps` env steps; returns episode returns and losses.
    fn train<'py>(&mut self, py: Python<'py>, env: &mut PyEnv, steps: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let out = train_agent(&mut self.inner, &mut env.inner, steps, seed).map_err(runtime_err)?;
        let d = PyDict::new(py);
        d.set_item("steps", out.steps)?;
        d.set_item("episode_returns", out.episode_returns)?;
        d.set_item("losses", out.losses)?;
        Ok(d)
    }

    /// Action for the env's current observation.
    #[pyo3(signature = (env, explore = false))]
    fn act(&mut self, env: &PyEnv, explore: bool) -> Vec<f64> {
        self.inner.act(&env.inner.observation(), explore)
    }

    /// Greedy rollout from reset; returns `{"values": [...], "metrics": {...}}`.
    #[pyo3(signature = (env, seed = 0, name = "agent"))]
    fn backtest<'py>(&mut self, py: Python<'py>, env: &mut PyEnv, seed: u64, name: &str) -> PyResult<Bound<'py, PyDict>> {
        let cfg = MetricsConfig::default();
        let r = backtest(name, &mut self.inner, &mut env.inner, seed, &cfg).map_err(runtime_err)?;
        let d = PyDict::new(py);
        d.set_item("values", r.curve.values().to_vec())?;
        d.set_item("metrics", loads(py, &serde_json::to_string(&r.metrics).map_err(runtime_err)?)?)?;
        Ok(d)
    }

    fn save<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.save())
    }

    fn load(&mut self, blob: &[u8]) -> PyResult<()> {
        self.inner.load(blob).map_err(value_err)
    }
}

/// Metrics of an equity curve. Keyword arguments set the metrics config.
#[pyfunction]
#[pyo3(signature = (values, **config))]
fn metrics<'py>(py: Python<'py>, values: Vec<f64>, config: Option<&Bound<'_, PyDict>>) -> PyResult<Bound<'py, PyAny>> {
    let cfg: MetricsConfig = from_kwargs(py, config)?;
    let m = compute_metrics(&values, &cfg).map_err(value_err)?;
    loads(py, &serde_json::to_string(&m).map_err(runtime_err)?)
}

fn moments(mu: Vec<f64>, sigma: Vec<Vec<f64>>) -> PyResult<MomentEstimate> {
    let n = mu.len();
    if sigma.len() != n || sigma.iter().any(|r| r.len() != n) {
        return Err(value_err("sigma must be an N x N matrix matching mu"));
    }
    Ok(MomentEstimate { mu, sigma: sigma.concat(), window: 0, ridge: 0.0 })
}

/// Long-only, fully invested mean-variance weights.
#[pyfunction]
#[pyo3(signature = (mu, sigma, risk_aversion = 1.0))]
fn mean_variance(mu: Vec<f64>, sigma: Vec<Vec<f64>>, risk_aversion: f64) -> PyResult<Vec<f64>> {
    let cfg = OptimizerConfig { risk_aversion, ..OptimizerConfig::default() };
    let s = mean_variance_optimize(&moments(mu, sigma)?, &cfg).map_err(value_err)?;
    Ok(s.weights.assets().to_vec())
}

/// Long-only, fully invested minimum-variance weights.
#[pyfunction]
fn min_variance(sigma: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let mu = vec![0.0; sigma.len()];
    let s = min_variance_optimize(&moments(mu, sigma)?, &OptimizerConfig::default()).map_err(value_err)?;
    Ok(s.weights.assets().to_vec())
}

#[pyfunction]
fn simplex_projection(x: Vec<f64>) -> Vec<f64> {
    project_to_simplex(&x)
}

/// Runs the rolling ensemble described by a TOML config file and returns the
/// comparison report as a dict.
#[pyfunction]
fn run_ensemble<'py>(py: Python<'py>, config_path: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let cfg = RunConfig::load(&config_path).map_err(value_err)?;
    let json = py
        .detach(|| -> Result<String, marketforge::pipeline::PipelineError> {
            let data = Arc::new(load_panel(&cfg)?);
            Ok(run_ensemble_job(&cfg, data)?.comparison.to_json())
        })
        .map_err(runtime_err)?;
    loads(py, &json)
}

/// Renders a report dict (as returned by `run_ensemble`) as a text table.
#[pyfunction]
fn render_table(py: Python<'_>, report: &Bound<'_, PyDict>, title: &str) -> PyResult<String> {
    let cmp = Comparison::from_json(&dumps(py, Some(report))?).map_err(value_err)?;
    Ok(cmp.render_text(title))
}

#[pymodule(name = "marketforge")]
fn marketforge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyEnv>()?;
    m.add_class::<PyLiquidationEnv>()?;
    m.add_class::<PyAgent>()?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(mean_variance, m)?)?;
    m.add_function(wrap_pyfunction!(min_variance, m)?)?;
    m.add_function(wrap_pyfunction!(simplex_projection, m)?)?;
    m.add_function(wrap_pyfunction!(run_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(render_table, m)?)?;
    Ok(())
}
