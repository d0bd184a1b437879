use serde::{Deserialize, Serialize};

use super::{MultivariateSeries, SeriesError};

/// Per-column min-max normalization fitted on observed entries only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub target_index: usize,
    /// Constant columns detected while fitting.
    #[serde(skip)]
    pub warnings: Vec<String>,
}

impl Scaler {
    fn range(&self, col: usize) -> f64 {
        self.max[col] - self.min[col]
    }

    pub fn scale(&self, col: usize, x: f64) -> f64 {
        let r = self.range(col);
        if r > 0.0 {
            (x - self.min[col]) / r
        } else {
            0.0
        }
    }

    pub fn unscale(&self, col: usize, x: f64) -> f64 {
        x * self.range(col) + self.min[col]
    }

    pub fn n_cols(&self) -> usize {
        self.min.len()
    }
}

pub fn fit_scaler(series: &MultivariateSeries) -> Result<Scaler, SeriesError> {
    let n = series.n_vars();
    let mut min = vec![f64::INFINITY; n];
    let mut max = vec![f64::NEG_INFINITY; n];
    for row in 0..series.len() {
        for (col, v) in series.row(row).iter().enumerate() {
            if let Some(x) = *v {
                min[col] = min[col].min(x);
                max[col] = max[col].max(x);
            }
        }
    }
    let mut warnings = Vec::new();
    for col in 0..n {
        let name = &series.names()[col];
        if min[col] > max[col] {
            return Err(SeriesError::Unobserved(name.clone()));
        }
        if min[col] == max[col] {
            let msg = format!("column `{name}` is constant; normalized to zeros");
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    Ok(Scaler {
        min,
        max,
        target_index: series.target_index(),
        warnings,
    })
}

/// Maps observed entries through `(x - min) / (max - min)`; missing stays missing.
pub fn apply_scaler(
    series: &MultivariateSeries,
    scaler: &Scaler,
) -> Result<MultivariateSeries, SeriesError> {
    if scaler.n_cols() != series.n_vars() {
        return Err(SeriesError::ScalerMismatch {
            scaler: scaler.n_cols(),
            series: series.n_vars(),
        });
    }
    Ok(series.map_values(|col, x| scaler.scale(col, x)))
}

/// Maps normalized target values back to original units.
pub fn invert_target(values: &[f64], scaler: &Scaler) -> Vec<f64> {
    values
        .iter()
        .map(|&x| scaler.unscale(scaler.target_index, x))
        .collect()
}
