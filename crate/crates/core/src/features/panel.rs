use super::{attach_exogenous, compute_indicator, ExogenousSpec, FeatureError, IndicatorSpec};
use crate::marketdata::MarketDataset;

/// Applies indicators then exogenous columns in declaration order and drops
/// leading rows until every column of every ticker is defined.
pub fn build_feature_panel(
    ds: &MarketDataset,
    specs: &[IndicatorSpec],
    exogenous: &[ExogenousSpec],
) -> Result<MarketDataset, FeatureError> {
    if specs.is_empty() && exogenous.is_empty() {
        return Err(FeatureError::NothingToBuild);
    }
    let mut out = ds.clone();
    for spec in specs {
        out = compute_indicator(&out, spec)?;
    }
    for ex in exogenous {
        out = attach_exogenous(&out, &ex.series, ex.policy, ex.lag)?;
    }
    let start = out.first_fully_valid_row();
    if start >= out.n_rows() {
        return Err(FeatureError::EmptyPanel);
    }
    Ok(out.slice_rows(start..out.n_rows())?)
}
