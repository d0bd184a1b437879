//! Sequential forward imputation of the target gap with a seed ensemble.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::derive_seed;
use crate::mlp::{fit, MlpArchitecture, MlpError, MlpModel, TrainConfig};
use crate::series::{
    add_temporal_features, apply_scaler, build_lagged_table, fit_scaler, reduce_lagged_table,
    GapSpec, MultivariateSeries, Scaler, SeriesError,
};

const MEMBER_TAG: u64 = 0xf1a1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImputeError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(
        "gap starts at row {start} but lag {lag} needs {needed} fully observed rows before it"
    )]
    InsufficientHistory {
        start: usize,
        lag: usize,
        needed: usize,
    },
    #[error("supporting column `{column}` is missing at row {row}, inside the imputation window")]
    MissingSupport { column: String, row: usize },
    #[error("model does not match series: {0}")]
    Mismatch(String),
    #[error("invalid model: {0}")]
    Invalid(String),
}

/// A k-member ensemble of identically shaped networks plus the scaler they
/// were trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImputationModel {
    pub architecture: MlpArchitecture,
    /// Column names the members were trained on, temporal columns included.
    pub names: Vec<String>,
    /// Number of calendar columns appended before training.
    pub temporal_columns: usize,
    pub scaler: Scaler,
    pub members: Vec<MlpModel>,
}

impl ImputationModel {
    pub fn validate(&self) -> Result<(), ImputeError> {
        let invalid = |m: String| Err(ImputeError::Invalid(m));
        if self.members.is_empty() {
            return invalid("ensemble has no members".into());
        }
        let width = (self.architecture.lag + 1) * self.names.len();
        for (i, m) in self.members.iter().enumerate() {
            if m.input_width != width {
                return invalid(format!(
                    "member {i} has input width {}, expected {width}",
                    m.input_width
                ));
            }
            if m.architecture != self.architecture {
                return invalid(format!("member {i} has a different architecture"));
            }
        }
        if self.scaler.n_cols() != self.names.len() {
            return invalid(format!(
                "scaler covers {} columns, model has {}",
                self.scaler.n_cols(),
                self.names.len()
            ));
        }
        if self.scaler.target_index >= self.names.len() {
            return invalid("scaler target index out of range".into());
        }
        if self.temporal_columns >= self.names.len() {
            return invalid("temporal column count exceeds column count".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    /// Parses and validates; errors carry the JSON path of the offending value.
    pub fn from_json(text: &str) -> Result<Self, ImputeError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let model: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| ImputeError::Invalid(format!("{}: {}", e.path(), e.inner())))?;
        model.validate()?;
        Ok(model)
    }

    /// Ensemble mean of the members' inference outputs for one normalized row.
    pub fn predict_row(&self, input: &[f64]) -> Result<f64, ImputeError> {
        let x = Array2::from_shape_vec((1, input.len()), input.to_vec())
            .map_err(|e| ImputeError::Invalid(e.to_string()))?;
        let mut sum = 0.0;
        for m in &self.members {
            sum += m.predict(x.view())?[0];
        }
        Ok(sum / self.members.len() as f64)
    }
}

/// Adds calendar columns when `temporal` is set and the series lacks them.
pub fn prepare_series(
    series: &MultivariateSeries,
    temporal: bool,
) -> Result<MultivariateSeries, SeriesError> {
    if temporal && series.temporal_columns() == 0 {
        add_temporal_features(series)
    } else {
        Ok(series.clone())
    }
}

/// Retrains `k` seeded members on every row of the reduced lagged table
/// (training and validation rows together).
///
/// `series` is in original units and already carries any temporal columns;
/// the scaler is fitted here on its observed entries.
pub fn finalize_model(
    series: &MultivariateSeries,
    arch: &MlpArchitecture,
    k: usize,
    config: &TrainConfig,
) -> Result<ImputationModel, ImputeError> {
    if k == 0 {
        return Err(ImputeError::Invalid(
            "ensemble size must be at least 1".into(),
        ));
    }
    let scaler = fit_scaler(series)?;
    let scaled = apply_scaler(series, &scaler)?;
    let table = reduce_lagged_table(&build_lagged_table(&scaled, arch.lag)?);
    let (x, y) = table.to_dense()?;
    let members = (0..k)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(config.seed, &[MEMBER_TAG, i as u64]);
            fit(x.view(), y.view(), arch, &config.with_seed(seed)).map(|(m, _)| m)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ImputationModel {
        architecture: *arch,
        names: series.names().to_vec(),
        temporal_columns: series.temporal_columns(),
        scaler,
        members,
    })
}

/// Result of filling one gap.
#[derive(Debug, Clone, PartialEq)]
pub struct Imputation {
    /// Gap-free series in original units, same columns as the input.
    pub series: MultivariateSeries,
    pub gap: Option<GapSpec>,
    /// Rows whose normalized prediction fell outside `[0, 1]`.
    pub out_of_range: Vec<usize>,
}

impl Imputation {
    pub fn imputed_mask(&self) -> Vec<bool> {
        (0..self.series.len())
            .map(|r| self.gap.is_some_and(|g| g.contains(r)))
            .collect()
    }

    /// Filled target values over the gap, in original units.
    pub fn fill(&self) -> Vec<f64> {
        match self.gap {
            Some(g) => (g.start_index..=g.end_index)
                .map(|r| {
                    self.series
                        .value(r, self.series.target_index())
                        .expect("filled")
                })
                .collect(),
            None => Vec::new(),
        }
    }
}

/// Fills the target gap first to last, feeding each estimate into the
/// windows of later steps. Observed values are copied through untouched.
///
/// Accepts the series with or without the model's temporal columns; the
/// output has the same columns as the input.
pub fn impute(
    series: &MultivariateSeries,
    model: &ImputationModel,
) -> Result<Imputation, ImputeError> {
    model.validate()?;
    let Some(gap) = series.gap()? else {
        return Ok(Imputation {
            series: series.clone(),
            gap: None,
            out_of_range: Vec::new(),
        });
    };
    let full = prepare_series(series, model.temporal_columns > 0)?;
    if full.names() != model.names.as_slice() {
        return Err(ImputeError::Mismatch(format!(
            "columns {:?}, model expects {:?}",
            full.names(),
            model.names
        )));
    }
    if full.target_index() != model.scaler.target_index {
        return Err(ImputeError::Mismatch("target column differs".into()));
    }
    let lag = model.architecture.lag;
    let needed = lag + 1;
    if gap.start_index < needed {
        return Err(ImputeError::InsufficientHistory {
            start: gap.start_index,
            lag,
            needed,
        });
    }
    let scaled = apply_scaler(&full, &model.scaler)?;
    let n = full.n_vars();
    let target = full.target_index();
    // Normalized working copy of the rows the windows touch.
    let first = gap.start_index - needed;
    let mut window: Vec<Vec<f64>> = Vec::with_capacity(gap.end_index - first);
    for row in first..gap.end_index {
        let mut vals = Vec::with_capacity(n);
        for col in 0..n {
            match scaled.value(row, col) {
                Some(v) => vals.push(v),
                None if col == target => vals.push(f64::NAN),
                None => {
                    return Err(ImputeError::MissingSupport {
                        column: full.names()[col].clone(),
                        row,
                    })
                }
            }
        }
        window.push(vals);
    }
    let mut out_target = series.target();
    let mut out_of_range = Vec::new();
    let mut input = Vec::with_capacity(needed * n);
    for t in gap.start_index..=gap.end_index {
        input.clear();
        for row in t - needed..t {
            input.extend_from_slice(&window[row - first]);
        }
        let pred = model.predict_row(&input)?;
        if !(0.0..=1.0).contains(&pred) {
            out_of_range.push(t);
        }
        if t < gap.end_index {
            window[t - first][target] = pred;
        }
        out_target[t] = Some(model.scaler.unscale(target, pred));
    }
    if !out_of_range.is_empty() {
        log::warn!(
            "{} imputed value(s) fall outside the observed target range",
            out_of_range.len()
        );
    }
    Ok(Imputation {
        series: series.with_target(&out_target)?,
        gap: Some(gap),
        out_of_range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{init_model, DenseLayer};
    use crate::series::tests::series_from_columns;
    use ndarray::{arr1, arr2, Array1};

    fn arch(lag: usize) -> MlpArchitecture {
        MlpArchitecture {
            batch_size: 10,
            epochs: 50,
            layers: 1,
            nodes_per_layer: 1,
            dropout_rate: 0.0,
            lag,
        }
    }

    fn wrap(
        series: &MultivariateSeries,
        a: MlpArchitecture,
        members: Vec<MlpModel>,
    ) -> ImputationModel {
        ImputationModel {
            architecture: a,
            names: series.names().to_vec(),
            temporal_columns: 0,
            scaler: fit_scaler(series).unwrap(),
            members,
        }
    }

    /// One hidden ReLU node averaging the target at the two window rows.
    fn averaging_model(n: usize) -> MlpModel {
        let mut w = vec![0.0; 2 * n];
        w[0] = 0.5;
        w[n] = 0.5;
        let hidden = DenseLayer {
            weights: Array2::from_shape_vec((1, 2 * n), w).unwrap(),
            bias: arr1(&[0.0]),
        };
        let out = DenseLayer {
            weights: arr2(&[[1.0]]),
            bias: arr1(&[0.0]),
        };
        MlpModel::from_parts(arch(1), 2 * n, vec![hidden, out], 0).unwrap()
    }

    fn constant_model(width: usize, a: MlpArchitecture, c: f64) -> MlpModel {
        let mut m = init_model(&a, width, 1).unwrap();
        for l in &mut m.layers {
            l.weights.fill(0.0);
        }
        let last = m.layers.last_mut().unwrap();
        last.bias = Array1::from_elem(1, c);
        m
    }

    fn example_series() -> MultivariateSeries {
        let y = vec![
            Some(1.0),
            Some(3.0),
            Some(2.0),
            Some(6.0),
            None,
            None,
            Some(4.0),
            Some(5.0),
            Some(8.0),
        ];
        let a = (0..9).map(|i| Some(i as f64)).collect();
        let b = (0..9).map(|i| Some((i * i) as f64)).collect();
        series_from_columns(&[y, a, b])
    }

    #[test]
    fn worked_example_feeds_estimates_forward() {
        let s = example_series();
        let model = wrap(&s, arch(1), vec![averaging_model(3)]);
        let out = impute(&s, &model).unwrap();
        let t = out.series.target();
        // Averaging commutes with the affine scaling.
        let x5 = (2.0 + 6.0) / 2.0;
        let x6 = (6.0 + x5) / 2.0;
        assert!((t[4].unwrap() - x5).abs() < 1e-12);
        assert!((t[5].unwrap() - x6).abs() < 1e-12);
        assert_eq!(
            out.imputed_mask(),
            [false, false, false, false, true, true, false, false, false]
        );
    }

    #[test]
    fn no_gap_is_identity() {
        let s = series_from_columns(&[(0..9).map(|i| Some(i as f64)).collect()]);
        let model = wrap(&s, arch(1), vec![constant_model(2, arch(1), 0.5)]);
        let out = impute(&s, &model).unwrap();
        assert_eq!(out.series, s);
        assert!(out.gap.is_none());
    }

    #[test]
    fn constant_ensemble_propagates() {
        let s = example_series();
        let c = 0.25;
        let members = vec![constant_model(6, arch(1), c), constant_model(6, arch(1), c)];
        let model = wrap(&s, arch(1), members);
        let out = impute(&s, &model).unwrap();
        let expected = crate::series::invert_target(&[c], &model.scaler)[0];
        assert_eq!(out.fill(), vec![expected, expected]);
        // Original units: min 1, max 8.
        assert!((expected - 2.75).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_predictions_are_flagged_not_clipped() {
        let s = example_series();
        let model = wrap(&s, arch(1), vec![constant_model(6, arch(1), 1.5)]);
        let out = impute(&s, &model).unwrap();
        assert_eq!(out.out_of_range, vec![4, 5]);
        assert!((out.fill()[0] - 11.5).abs() < 1e-12);
    }

    #[test]
    fn insufficient_history() {
        let s = example_series();
        let model = wrap(&s, arch(4), vec![constant_model(15, arch(4), 0.5)]);
        assert!(matches!(
            impute(&s, &model),
            Err(ImputeError::InsufficientHistory {
                start: 4,
                needed: 5,
                ..
            })
        ));
    }

    fn gappy(n: usize, start: usize, len: usize) -> MultivariateSeries {
        let x: Vec<Option<f64>> = (0..n).map(|i| Some((i as f64 * 0.3).sin())).collect();
        let y: Vec<Option<f64>> = (0..n)
            .map(|i| {
                if (start..start + len).contains(&i) {
                    None
                } else {
                    Some((i as f64 * 0.3 - 0.3).sin() * 2.0 + 1.0)
                }
            })
            .collect();
        series_from_columns(&[y, x])
    }

    #[test]
    fn finalize_trains_members_on_all_rows() {
        let s = gappy(80, 40, 10);
        let a = MlpArchitecture {
            batch_size: 16,
            epochs: 40,
            layers: 2,
            nodes_per_layer: 8,
            dropout_rate: 0.1,
            lag: 2,
        };
        let m = finalize_model(&s, &a, 3, &TrainConfig::default()).unwrap();
        assert_eq!(m.members.len(), 3);
        assert!(m
            .members
            .iter()
            .all(|x| x.architecture == a && x.input_width == 6));
        assert_ne!(m.members[0].layers, m.members[1].layers);
        let one = finalize_model(&s, &a, 1, &TrainConfig::default()).unwrap();
        assert_eq!(one.members.len(), 1);

        let back = ImputationModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back.members, m.members);
        assert_eq!(back.scaler.min, m.scaler.min);

        let out = impute(&s, &m).unwrap();
        assert_eq!(out.fill().len(), 10);
        assert!(out.series.gap().unwrap().is_none());
    }

    #[test]
    fn ensemble_mean_no_worse_than_worst_member() {
        let s = gappy(120, 200, 0);
        let a = MlpArchitecture {
            batch_size: 20,
            epochs: 20,
            layers: 1,
            nodes_per_layer: 6,
            dropout_rate: 0.0,
            lag: 3,
        };
        let m = finalize_model(&s, &a, 4, &TrainConfig::default()).unwrap();
        let scaled = apply_scaler(&s, &m.scaler).unwrap();
        let table = build_lagged_table(&scaled, 3).unwrap();
        let (x, y) = table.to_dense().unwrap();
        let held = x.slice(ndarray::s![90.., ..]);
        let truth = y.slice(ndarray::s![90..]);
        let preds: Vec<Array1<f64>> = m
            .members
            .iter()
            .map(|mm| mm.predict(held).unwrap())
            .collect();
        let mse = |p: &Array1<f64>| (p - &truth).mapv(|d| d * d).mean().unwrap();
        let worst = preds.iter().map(mse).fold(0.0, f64::max);
        let mean = preds
            .iter()
            .fold(Array1::zeros(truth.len()), |acc, p| acc + p)
            / 4.0;
        assert!(mse(&mean) <= worst);
    }

    #[test]
    fn causal_and_pure() {
        let s = gappy(90, 50, 15);
        let a = MlpArchitecture {
            batch_size: 10,
            epochs: 10,
            layers: 1,
            nodes_per_layer: 5,
            dropout_rate: 0.0,
            lag: 4,
        };
        let m = finalize_model(&s, &a, 2, &TrainConfig::default()).unwrap();
        let base = impute(&s, &m).unwrap();
        for r in 0..s.len() {
            if (50..65).contains(&r) {
                continue;
            }
            assert_eq!(
                base.series.value(r, 0).map(f64::to_bits),
                s.value(r, 0).map(f64::to_bits)
            );
        }
        let mut y = s.target();
        let mut x = s.column(1);
        for r in 65..s.len() {
            y[r] = Some(-100.0);
            x[r] = Some(7.0);
        }
        let tweaked = series_from_columns(&[y, x]);
        let again = impute(&tweaked, &m).unwrap();
        assert_eq!(
            base.fill().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            again.fill().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn corrupted_json_names_path() {
        let s = example_series();
        let model = wrap(&s, arch(1), vec![averaging_model(3)]);
        let mut v: serde_json::Value = serde_json::from_str(&model.to_json()).unwrap();
        v["architecture"]["lag"] = serde_json::json!("two");
        let err = ImputationModel::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("architecture.lag"), "{err}");
        v["architecture"]["lag"] = serde_json::json!(1);
        v["members"] = serde_json::json!([]);
        assert!(ImputationModel::from_json(&v.to_string()).is_err());
    }
}
