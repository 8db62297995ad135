use std::ops::Range;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use rayon::prelude::*;
use serde::Serialize;

use super::candidates::{Candidate, EnvSpec, Role, SliceContext, TrainedCandidate};
use super::split::WindowRows;
use super::PipelineError;
use crate::env::FeatureNormalizer;
use crate::eval::{backtest, compute_metrics, BacktestResult, EquityCurve, MetricsConfig, MetricsReport};
use crate::marketdata::MarketDataset;
use crate::seed::{child_seed, named_subseed};

/// Validation score of one candidate in one window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateScore {
    pub name: String,
    pub role: Role,
    /// Annualized validation Sharpe; `None` when undefined.
    pub sharpe: Option<f64>,
}

/// Outcome of validating every candidate of a window.
#[derive(Debug, Clone)]
pub struct Selection {
    /// Index into the candidate list.
    pub winner: usize,
    pub scores: Vec<CandidateScore>,
    /// Validation backtests in candidate order.
    pub validation: Vec<BacktestResult>,
}

impl Selection {
    pub fn winner_name(&self) -> &str {
        &self.scores[self.winner].name
    }
}

/// Index of the best eligible score: highest Sharpe, undefined below every
/// defined value, ties to the earliest entry. Baselines never win.
pub fn argmax_sharpe(scores: &[CandidateScore]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if s.role != Role::Candidate {
            continue;
        }
        let better = match best {
            None => true,
            Some(j) => match (s.sharpe, scores[j].sharpe) {
                (Some(a), Some(b)) => a > b,
                (Some(_), None) => true,
                _ => false,
            },
        };
        if better {
            best = Some(i);
        }
    }
    best
}

/// Where and how candidates are trained and traded.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub data: Arc<MarketDataset>,
    pub env: EnvSpec,
    pub metrics: MetricsConfig,
    pub seed: u64,
}

impl RunSetup {
    pub fn context(&self, rows: Range<usize>, seed: u64) -> SliceContext {
        let n = self.data.n_tickers();
        SliceContext {
            data: self.data.clone(),
            rows,
            env_kind: self.env.kind,
            obs_dim: self.env.obs_dim(n, self.data.n_columns()),
            action_dim: self.env.action_dim(n),
            seed,
        }
    }

    /// Seed of `name` in window `k`.
    pub fn candidate_seed(&self, name: &str, k: usize) -> u64 {
        let sub = named_subseed(self.seed, name);
        if k == 0 {
            sub
        } else {
            child_seed(sub, k as u64)
        }
    }

    /// Trains every candidate on `rows`, in parallel, in candidate order.
    pub fn train_all(
        &self,
        candidates: &[Candidate],
        rows: Range<usize>,
        normalizer: &FeatureNormalizer,
        k: usize,
    ) -> Result<Vec<TrainedCandidate>, PipelineError> {
        candidates
            .par_iter()
            .map(|c| {
                let ctx = self.context(rows.clone(), self.candidate_seed(&c.name, k));
                let mut env = self
                    .env
                    .build(&self.data, rows.clone(), normalizer, self.env.config.initial_capital)
                    .map_err(|e| PipelineError::for_candidate(&c.name, e))?;
                c.train(&ctx, &mut *env)
            })
            .collect()
    }

    /// Greedy backtest of a trained candidate over `rows` starting from
    /// `capital`.
    pub fn run_frozen(
        &self,
        candidate: &Candidate,
        trained: &TrainedCandidate,
        rows: Range<usize>,
        normalizer: &FeatureNormalizer,
        capital: f64,
    ) -> Result<BacktestResult, PipelineError> {
        let tag = |e: PipelineError| PipelineError::for_candidate(&candidate.name, e);
        let ctx = self.context(rows.clone(), trained.seed);
        let mut policy = candidate.deploy(&ctx, &trained.blob)?;
        let mut env = self.env.build(&self.data, rows, normalizer, capital).map_err(tag)?;
        let mut res = backtest(&candidate.name, &mut *policy, &mut *env, trained.seed, &self.metrics)
            .map_err(|e| tag(e.into()))?;
        res.config = serde_json::json!({ "role": candidate.role });
        Ok(res)
    }
}

/// Backtests each trained candidate on the validation rows and picks the
/// winner by validation Sharpe.
pub fn ensemble_select(
    setup: &RunSetup,
    candidates: &[Candidate],
    trained: &[TrainedCandidate],
    rows: Range<usize>,
    normalizer: &FeatureNormalizer,
) -> Result<Selection, PipelineError> {
    let validation: Vec<BacktestResult> = candidates
        .par_iter()
        .zip(trained.par_iter())
        .map(|(c, t)| setup.run_frozen(c, t, rows.clone(), normalizer, setup.env.config.initial_capital))
        .collect::<Result<_, _>>()?;
    let scores: Vec<CandidateScore> = candidates
        .iter()
        .zip(&validation)
        .map(|(c, r)| CandidateScore { name: c.name.clone(), role: c.role, sharpe: r.metrics.sharpe })
        .collect();
    let winner = argmax_sharpe(&scores)
        .ok_or_else(|| PipelineError::Config("no agent with role \"candidate\" to select from".into()))?;
    Ok(Selection { winner, scores, validation })
}

/// One walk-forward window.
#[derive(Debug, Clone, Serialize)]
pub struct WindowRecord {
    pub index: usize,
    pub train: [DateTime<Utc>; 2],
    pub valid: [DateTime<Utc>; 2],
    pub test: [DateTime<Utc>; 2],
    pub scores: Vec<CandidateScore>,
    pub winner: String,
    /// Winner's test segment, starting at the running ensemble value.
    #[serde(skip)]
    pub segment: EquityCurve,
    #[serde(skip)]
    pub rows: WindowRows,
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub windows: Vec<WindowRecord>,
    pub curve: EquityCurve,
    pub metrics: MetricsReport,
    /// Each entry traded alone over the same test segments.
    pub candidates: IndexMap<String, (EquityCurve, MetricsReport)>,
    /// Candidates trained in the final window.
    pub last_trained: Vec<TrainedCandidate>,
}

struct Stitch {
    ts: Vec<DateTime<Utc>>,
    values: Vec<f64>,
}

impl Stitch {
    fn new() -> Self {
        Stitch { ts: Vec::new(), values: Vec::new() }
    }

    fn running(&self, initial: f64) -> f64 {
        self.values.last().copied().unwrap_or(initial)
    }

    fn push(&mut self, seg: &EquityCurve) {
        let skip = usize::from(!self.values.is_empty());
        self.ts.extend_from_slice(&seg.timestamps()[skip..]);
        self.values.extend_from_slice(&seg.values()[skip..]);
    }

    fn finish(self, cfg: &MetricsConfig) -> Result<(EquityCurve, MetricsReport), PipelineError> {
        let curve = EquityCurve::new(self.ts, self.values)?;
        let metrics = compute_metrics(curve.values(), cfg)?;
        Ok((curve, metrics))
    }
}

fn span(ds: &MarketDataset, r: &Range<usize>) -> [DateTime<Utc>; 2] {
    let ts = ds.timestamps();
    [ts[r.start], ts[r.end - 1]]
}

/// Retrains, selects and trades window by window. Each test segment starts
/// from the previous segment's final value.
pub fn run_windows(
    setup: &RunSetup,
    candidates: &[Candidate],
    windows: &[WindowRows],
) -> Result<EnsembleResult, PipelineError> {
    if candidates.is_empty() {
        return Err(PipelineError::Config("no candidates".into()));
    }
    if windows.is_empty() {
        return Err(PipelineError::InsufficientData("no windows".into()));
    }
    let initial = setup.env.config.initial_capital;
    let mut ensemble = Stitch::new();
    let mut singles: Vec<Stitch> = candidates.iter().map(|_| Stitch::new()).collect();
    let mut records = Vec::with_capacity(windows.len());
    let mut last_trained = Vec::new();
    for (k, w) in windows.iter().enumerate() {
        let train_slice = setup.data.slice_rows(w.train.clone())?;
        let normalizer = FeatureNormalizer::fit(&train_slice);
        let trained = setup.train_all(candidates, w.train.clone(), &normalizer, k)?;
        let selection = ensemble_select(setup, candidates, &trained, w.valid.clone(), &normalizer)?;
        let win = selection.winner;
        log::info!("window {k}: winner {} ({:?})", selection.winner_name(), selection.scores[win].sharpe);
        let segment =
            setup.run_frozen(&candidates[win], &trained[win], w.test.clone(), &normalizer, ensemble.running(initial))?;
        ensemble.push(&segment.curve);
        let singles_seg: Vec<BacktestResult> = candidates
            .par_iter()
            .zip(trained.par_iter())
            .zip(singles.par_iter())
            .map(|((c, t), s)| setup.run_frozen(c, t, w.test.clone(), &normalizer, s.running(initial)))
            .collect::<Result<_, _>>()?;
        for (s, r) in singles.iter_mut().zip(&singles_seg) {
            s.push(&r.curve);
        }
        records.push(WindowRecord {
            index: k,
            train: span(&setup.data, &w.train),
            valid: span(&setup.data, &w.valid),
            test: span(&setup.data, &w.test),
            winner: selection.winner_name().to_string(),
            scores: selection.scores,
            segment: segment.curve,
            rows: w.clone(),
        });
        last_trained = trained;
    }
    let (curve, metrics) = ensemble.finish(&setup.metrics)?;
    let mut per = IndexMap::new();
    for (c, s) in candidates.iter().zip(singles) {
        per.insert(c.name.clone(), s.finish(&setup.metrics)?);
    }
    Ok(EnsembleResult { windows: records, curve, metrics, candidates: per, last_trained })
}

/// Runs the configured rolling windows, or the single split as one window.
pub fn run_rolling_ensemble(
    setup: &RunSetup,
    candidates: &[Candidate],
    windows: &WindowSource,
) -> Result<EnsembleResult, PipelineError> {
    let rows = windows.rows(&setup.data)?;
    run_windows(setup, candidates, &rows)
}

/// How the dataset is cut into windows.
#[derive(Debug, Clone)]
pub enum WindowSource {
    Split(super::SplitSpec),
    Rolling(super::RollingWindowSpec),
}

impl WindowSource {
    pub fn rows(&self, ds: &MarketDataset) -> Result<Vec<WindowRows>, PipelineError> {
        match self {
            WindowSource::Split(s) => Ok(vec![s.window_rows(ds)?]),
            WindowSource::Rolling(r) => r.windows(ds.n_rows()),
        }
    }
}
