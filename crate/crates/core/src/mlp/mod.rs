//! Feed-forward regression network written against `ndarray`: ReLU hidden
//! layers, a linear output node, inverted dropout, MSE loss, reverse-mode
//! gradients and Adam.

mod model;
mod train;

pub use model::{forward, init_model, DenseLayer, DropoutMasks, MlpArchitecture, MlpModel, Mode};
pub use train::{
    adam_update, fit, gradients, mse, train, AdamState, Gradients, LayerGradient, TrainConfig,
    Trained,
};

use thiserror::Error;

use crate::series::SeriesError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlpError {
    #[error("input width {got} does not match model width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("bad model shape: {0}")]
    Shape(String),
    #[error("non-finite loss in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("non-finite parameters after training")]
    NonFiniteParameters,
    #[error(transparent)]
    Table(#[from] SeriesError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::tests::series_from_columns;
    use crate::series::{build_lagged_table, split_train_val};

    #[test]
    fn val_mse_matches_inference_over_val_rows() {
        let xs: Vec<Option<f64>> = (0..80)
            .map(|i| Some((i as f64 * 0.3).sin() * 0.5 + 0.5))
            .collect();
        let zs: Vec<Option<f64>> = (0..80).map(|i| Some((i % 7) as f64 / 7.0)).collect();
        let s = series_from_columns(&[xs, zs]);
        let arch = MlpArchitecture {
            batch_size: 10,
            epochs: 30,
            layers: 2,
            nodes_per_layer: 6,
            dropout_rate: 0.1,
            lag: 3,
        };
        let table = build_lagged_table(&s, 3).unwrap();
        let (tr, va) = split_train_val(&table, 0.85).unwrap();
        let out = train(&tr, &va, &arch, &TrainConfig::default().with_seed(4)).unwrap();

        let mut preds = Vec::new();
        let mut targets = Vec::new();
        for r in 0..va.rows() {
            let row: ndarray::Array1<f64> = va.input_row(r).iter().map(|v| v.unwrap()).collect();
            preds.push(forward(&out.model, row.view(), Mode::Infer, 0).unwrap());
            targets.push(va.output(r).unwrap());
        }
        assert!((out.val_mse - mse(&preds, &targets).unwrap()).abs() < 1e-14);

        let wrong = MlpArchitecture { lag: 4, ..arch };
        assert!(train(&tr, &va, &wrong, &TrainConfig::default()).is_err());
    }
}
