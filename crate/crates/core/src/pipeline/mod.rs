//! The train / validate / trade lifecycle: temporal splits, candidate
//! training, validation-Sharpe ensemble selection over rolling windows, and
//! walk-forward replay.

mod candidates;
mod config;
mod ensemble;
mod jobs;
mod replay;
mod split;

pub use candidates::{Candidate, CandidateFactory, EnvKind, EnvSpec, Role, SliceContext, TrainedCandidate};
pub use config::{AgentKind, AgentSpec, DataConfig, DataSource, EvalConfig, ExogenousConfig, FeatureConfig, RunConfig};
pub use ensemble::{
    argmax_sharpe, ensemble_select, run_rolling_ensemble, run_windows, CandidateScore, EnsembleResult, RunSetup, Selection,
    WindowRecord, WindowSource,
};
pub use jobs::{
    build_candidates, ensemble_report, load_panel, load_raw, run_backtest_job, run_ensemble_job, run_training_job,
    write_curves_csv, write_training_outputs, EnsembleReport,
};
pub use replay::{walk_forward_replay, ReplaySnapshot};
pub use split::{split_dataset, DateRange, RollingWindowSpec, SplitSpec, Splits, WindowRows};

use thiserror::Error;

use crate::agents::AgentError;
use crate::env::EnvError;
use crate::eval::EvalError;
use crate::features::FeatureError;
use crate::marketdata::DataError;
use crate::strategies::StrategyError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("split ranges overlap or are out of order: {0}")]
    OverlappingSplits(String),
    #[error("split `{0}` selects no rows")]
    EmptySlice(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("candidate `{name}`: {source}")]
    Candidate {
        name: String,
        #[source]
        source: Box<PipelineError>,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    pub(crate) fn for_candidate(name: &str, e: impl Into<PipelineError>) -> Self {
        PipelineError::Candidate { name: name.to_string(), source: Box::new(e.into()) }
    }

    /// Process exit code: 2 for configuration problems, 3 for data problems,
    /// 4 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::OverlappingSplits(_) => 2,
            PipelineError::Data(_) | PipelineError::Feature(_) | PipelineError::EmptySlice(_) => 3,
            PipelineError::InsufficientData(_) => 3,
            PipelineError::Candidate { source, .. } => source.exit_code(),
            PipelineError::Env(EnvError::InvalidConfig(_)) => 2,
            PipelineError::Agent(AgentError::InvalidConfig(_)) => 2,
            PipelineError::Strategy(StrategyError::InvalidConfig(_) | StrategyError::WindowTooShort { .. }) => 2,
            _ => 4,
        }
    }
}
