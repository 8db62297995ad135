//! Feature engineering on a [`MarketDataset`](crate::marketdata::MarketDataset):
//! technical indicators, the turbulence index, and exogenous columns.

mod exogenous;
pub mod indicators;
mod panel;
mod turbulence;

pub use exogenous::{attach_exogenous, load_exogenous_csv, ExogenousSeries, ExogenousSpec, ExogenousTrack, FillPolicy, Lag};
pub use indicators::{compute_indicator, IndicatorKind, IndicatorSpec};
pub use panel::build_feature_panel;
pub use turbulence::{attach_turbulence, compute_turbulence, TurbulenceSeries, TURBULENCE_COLUMN};

use thiserror::Error;

use crate::marketdata::DataError;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("window {window} too large for {rows} rows")]
    WindowTooLarge { window: usize, rows: usize },
    #[error("indicator windows must be at least 1")]
    InvalidWindow,
    #[error("column `{0}` already exists")]
    NameCollision(String),
    #[error("series `{0}` timestamps are not strictly increasing")]
    UnsortedSeries(String),
    #[error("turbulence lookback {lookback} must be at least N + 2 = {min}")]
    LookbackTooShort { lookback: usize, min: usize },
    #[error("no indicators or exogenous series requested")]
    NothingToBuild,
    #[error("no fully-defined rows remain after warm-up")]
    EmptyPanel,
    #[error("bad exogenous file: {0}")]
    BadFormat(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
