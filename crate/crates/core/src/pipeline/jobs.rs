use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use indexmap::IndexMap;
use serde_json::json;

use super::candidates::{Candidate, Role, TrainedCandidate};
use super::config::{DataSource, RunConfig};
use super::ensemble::{run_rolling_ensemble, EnsembleResult, RunSetup, WindowSource};
use super::replay::walk_forward_replay;
use super::PipelineError;
use crate::env::FeatureNormalizer;
use crate::eval::{BacktestResult, Comparison, ComparisonRow, EquityCurve};
use crate::features::{attach_exogenous, attach_turbulence, compute_indicator, load_exogenous_csv, Lag};
use crate::marketdata::{
    align, fetch_http, format_timestamp, generate_gbm_from, load_csv, read_dataset, DataSourceSpec, GbmParams,
    MarketDataset,
};

fn broadcast(v: &[f64], n: usize, what: &str) -> Result<Vec<f64>, PipelineError> {
    match v.len() {
        1 => Ok(vec![v[0]; n]),
        l if l == n => Ok(v.to_vec()),
        l => Err(PipelineError::Config(format!("data.{what} has {l} entries for {n} tickers"))),
    }
}

/// The aligned raw bars described by `[data]`.
pub fn load_raw(cfg: &RunConfig) -> Result<MarketDataset, PipelineError> {
    let d = &cfg.data;
    let need_tickers = || {
        if d.tickers.is_empty() {
            Err(PipelineError::Config("data.tickers is empty".into()))
        } else {
            Ok(())
        }
    };
    match d.source {
        DataSource::Gbm => {
            need_tickers()?;
            let n = d.tickers.len();
            let correlation = match &d.correlation {
                Some(c) => c.clone(),
                None => (0..n * n).map(|i| if i % (n + 1) == 0 { 1.0 } else { 0.0 }).collect(),
            };
            let params = GbmParams {
                s0: broadcast(&d.s0, n, "s0")?,
                mu: broadcast(&d.mu, n, "mu")?,
                sigma: broadcast(&d.sigma, n, "sigma")?,
                correlation,
                periods_per_year: d.interval.periods_per_year().round() as u32,
            };
            let start = d.start.unwrap_or_else(|| DateTime::<Utc>::UNIX_EPOCH + Duration::days(10959));
            let raw = generate_gbm_from(&params, &d.tickers, d.bars, cfg.seed, start)?;
            Ok(align(&[raw])?)
        }
        DataSource::Csv => {
            if d.paths.is_empty() {
                return Err(PipelineError::Config("data.paths is empty".into()));
            }
            let tables = d
                .paths
                .iter()
                .map(|p| load_csv(cfg.resolve(p), d.interval))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(align(&tables)?)
        }
        DataSource::Binary => {
            let p = d.paths.first().ok_or_else(|| PipelineError::Config("data.paths is empty".into()))?;
            let file = File::open(cfg.resolve(p)).map_err(crate::marketdata::DataError::from)?;
            Ok(read_dataset(std::io::BufReader::new(file))?)
        }
        DataSource::Http => {
            need_tickers()?;
            let base = d.base_url.clone().ok_or_else(|| PipelineError::Config("data.base_url is required".into()))?;
            let (start, end) = match (d.start, d.end) {
                (Some(s), Some(e)) => (s, e),
                _ => return Err(PipelineError::Config("data.start and data.end are required for http".into())),
            };
            let mut spec = DataSourceSpec::new(base);
            spec.auth_token = d.auth_token.clone();
            if let Some(r) = d.rate_limit {
                spec.rate_limit = r;
            }
            if let Some(m) = d.max_retries {
                spec.max_retries = m;
            }
            Ok(align(&[fetch_http(&spec, &d.tickers, start, end, d.interval)?])?)
        }
    }
}

/// Raw bars plus the configured feature columns, trimmed to the first row
/// where every column is defined.
pub fn load_panel(cfg: &RunConfig) -> Result<MarketDataset, PipelineError> {
    let mut ds = load_raw(cfg)?;
    let f = &cfg.features;
    for spec in &f.indicators {
        ds = compute_indicator(&ds, spec)?;
    }
    for ex in &f.exogenous {
        let lag = match (ex.lag_days, ex.lag_months) {
            (Some(_), Some(_)) => return Err(PipelineError::Config("set lag_days or lag_months, not both".into())),
            (Some(d), None) => Lag::Exact(Duration::days(d)),
            (None, Some(m)) => Lag::CalendarMonths(m),
            (None, None) => Lag::none(),
        };
        for series in load_exogenous_csv(cfg.resolve(&ex.path))? {
            ds = attach_exogenous(&ds, &series, ex.policy, lag)?;
        }
    }
    if let Some(lookback) = f.turbulence_lookback {
        ds = attach_turbulence(&ds, lookback)?;
    }
    let start = ds.first_fully_valid_row();
    if start >= ds.n_rows() {
        return Err(crate::features::FeatureError::EmptyPanel.into());
    }
    Ok(ds.slice_rows(start..ds.n_rows())?)
}

pub fn build_candidates(cfg: &RunConfig) -> Vec<Candidate> {
    cfg.candidates()
}

pub(crate) fn window_source(cfg: &RunConfig) -> WindowSource {
    match (&cfg.split, &cfg.rolling) {
        (Some(s), _) => WindowSource::Split(*s),
        (None, Some(r)) => WindowSource::Rolling(r.clone()),
        (None, None) => unreachable!("validated config has a split or rolling block"),
    }
}

pub(crate) fn setup(cfg: &RunConfig, data: Arc<MarketDataset>) -> RunSetup {
    let metrics = cfg.eval.metrics(data.interval());
    RunSetup { data, env: cfg.env.clone(), metrics, seed: cfg.seed }
}

/// Trains every agent on the first train slice.
pub fn run_training_job(
    cfg: &RunConfig,
    data: Arc<MarketDataset>,
) -> Result<IndexMap<String, TrainedCandidate>, PipelineError> {
    let windows = window_source(cfg).rows(&data)?;
    let rows = windows[0].train.clone();
    let setup = setup(cfg, data);
    let normalizer = FeatureNormalizer::fit(&setup.data.slice_rows(rows.clone())?);
    let candidates = build_candidates(cfg);
    let trained = setup.train_all(&candidates, rows, &normalizer, 0)?;
    Ok(trained.into_iter().map(|t| (t.name.clone(), t)).collect())
}

/// Writes `<name>.bin`, `<name>_learning.csv` and `manifest.json`.
pub fn write_training_outputs(
    dir: &Path,
    trained: &IndexMap<String, TrainedCandidate>,
) -> Result<(), PipelineError> {
    fs::create_dir_all(dir)?;
    let mut manifest = IndexMap::new();
    for (name, t) in trained {
        fs::write(dir.join(format!("{name}.bin")), &t.blob)?;
        let mut w = BufWriter::new(File::create(dir.join(format!("{name}_learning.csv")))?);
        writeln!(w, "episode,return")?;
        for (i, r) in t.outcome.episode_returns.iter().enumerate() {
            writeln!(w, "{i},{r}")?;
        }
        w.flush()?;
        manifest.insert(
            name.clone(),
            json!({
                "seed": t.seed,
                "steps": t.outcome.steps,
                "episodes": t.outcome.episode_returns.len(),
                "updates": t.outcome.losses.len(),
                "blob_bytes": t.blob.len(),
            }),
        );
    }
    let text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)? + "\n";
    fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}

/// The ensemble, then candidates, then baselines, with window metadata.
pub fn ensemble_report(cfg: &RunConfig, data: &MarketDataset, result: &EnsembleResult) -> Comparison {
    let mut strategies = vec![ComparisonRow::from_metrics("Ensemble", &result.metrics)];
    for role in [Role::Candidate, Role::Baseline] {
        for (name, spec) in &cfg.agents {
            if spec.role == role {
                let (_, m) = &result.candidates[name];
                strategies.push(ComparisonRow::from_metrics(name, m));
            }
        }
    }
    let mut meta = IndexMap::new();
    meta.insert("seed".into(), json!(cfg.seed));
    meta.insert("tickers".into(), json!(data.tickers()));
    meta.insert(
        "test_period".into(),
        json!([format_timestamp(&result.curve.timestamps()[0]), format_timestamp(result.curve.timestamps().last().unwrap())]),
    );
    meta.insert("final_value".into(), json!(result.curve.values().last()));
    meta.insert("metrics".into(), serde_json::to_value(&result.metrics).expect("metrics serialize"));
    meta.insert("windows".into(), serde_json::to_value(&result.windows).expect("windows serialize"));
    if let Some(t) = &cfg.eval.title {
        meta.insert("title".into(), json!(t));
    }
    Comparison { strategies, meta }
}

/// Report plus the underlying result.
#[derive(Debug, Clone)]
pub struct EnsembleReport {
    pub comparison: Comparison,
    pub result: EnsembleResult,
}

pub fn run_ensemble_job(cfg: &RunConfig, data: Arc<MarketDataset>) -> Result<EnsembleReport, PipelineError> {
    let setup = setup(cfg, data);
    let candidates = build_candidates(cfg);
    let result = run_rolling_ensemble(&setup, &candidates, &window_source(cfg))?;
    let comparison = ensemble_report(cfg, &setup.data, &result);
    Ok(EnsembleReport { comparison, result })
}

/// `timestamp` plus one value column per curve. Curves must share
/// timestamps.
pub fn write_curves_csv<W: Write>(curves: &[(&str, &EquityCurve)], out: W) -> Result<(), PipelineError> {
    let Some((_, first)) = curves.first() else {
        return Err(PipelineError::Config("no curves to write".into()));
    };
    if curves.iter().any(|(_, c)| c.timestamps() != first.timestamps()) {
        return Err(PipelineError::Config("curves do not share timestamps".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| PipelineError::Io(std::io::Error::other(e));
    let mut header = vec!["timestamp".to_string()];
    header.extend(curves.iter().map(|(n, _)| n.to_string()));
    w.write_record(&header).map_err(io)?;
    for (i, ts) in first.timestamps().iter().enumerate() {
        let mut rec = vec![format_timestamp(ts)];
        rec.extend(curves.iter().map(|(_, c)| c.values()[i].to_string()));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

impl EnsembleReport {
    pub fn curves(&self) -> Vec<(&str, &EquityCurve)> {
        let mut out = vec![("Ensemble", &self.result.curve)];
        out.extend(self.result.candidates.iter().map(|(n, (c, _))| (n.as_str(), c)));
        out
    }
}

/// Backtests saved parameters from `policy_dir` on the first test slice.
/// With `eval.report_every` set, each agent also streams replay snapshots
/// to `<policy_dir>/<name>_replay.jsonl`.
pub fn run_backtest_job(
    cfg: &RunConfig,
    data: Arc<MarketDataset>,
    policy_dir: &Path,
) -> Result<Vec<BacktestResult>, PipelineError> {
    let w = window_source(cfg).rows(&data)?.remove(0);
    let setup = setup(cfg, data);
    let normalizer = FeatureNormalizer::fit(&setup.data.slice_rows(w.train.clone())?);
    let capital = setup.env.config.initial_capital;
    let mut out = Vec::new();
    for c in build_candidates(cfg) {
        let path = policy_dir.join(format!("{}.bin", c.name));
        let blob = fs::read(&path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let trained = TrainedCandidate {
            name: c.name.clone(),
            seed: setup.candidate_seed(&c.name, 0),
            blob,
            outcome: Default::default(),
        };
        let res = match cfg.eval.report_every {
            None => setup.run_frozen(&c, &trained, w.test.clone(), &normalizer, capital)?,
            Some(every) => {
                let ctx = setup.context(w.test.clone(), trained.seed);
                let mut policy = c.deploy(&ctx, &trained.blob)?;
                let mut env = setup.env.build(&setup.data, w.test.clone(), &normalizer, capital)?;
                let file = BufWriter::new(File::create(policy_dir.join(format!("{}_replay.jsonl", c.name)))?);
                walk_forward_replay(&c.name, &mut *policy, &mut *env, trained.seed, &setup.metrics, every, file)?.0
            }
        };
        out.push(res);
    }
    Ok(out)
}
