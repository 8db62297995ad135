use crate::marketdata::MarketDataset;

/// Per-(ticker, column) affine map `(x - mean) / std`, fit on one dataset
/// (the training slice) and applied unchanged elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNormalizer {
    n_tickers: usize,
    n_columns: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl FeatureNormalizer {
    pub fn fit(ds: &MarketDataset) -> Self {
        let (nt, nf) = (ds.n_tickers(), ds.n_columns());
        let mut mean = vec![0.0; nt * nf];
        let mut scale = vec![1.0; nt * nf];
        for n in 0..nt {
            for f in 0..nf {
                let xs: Vec<f64> = (ds.valid_from(n, f)..ds.n_rows()).map(|t| ds.get(t, n, f)).collect();
                if xs.is_empty() {
                    continue;
                }
                let m = xs.iter().sum::<f64>() / xs.len() as f64;
                let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
                mean[n * nf + f] = m;
                scale[n * nf + f] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
            }
        }
        FeatureNormalizer { n_tickers: nt, n_columns: nf, mean, scale }
    }

    pub fn matches(&self, ds: &MarketDataset) -> bool {
        self.n_tickers == ds.n_tickers() && self.n_columns == ds.n_columns()
    }

    pub fn apply(&self, n: usize, cell: &[f64], out: &mut Vec<f64>) {
        let base = n * self.n_columns;
        out.extend(cell.iter().enumerate().map(|(f, x)| (x - self.mean[base + f]) / self.scale[base + f]));
    }
}
