//! Gappy multivariate time series: the data model every other module works on.
//!
//! A [`MultivariateSeries`] is an `S x N` matrix of observations on a uniform
//! time grid. Missing observations are `None`; only the designated target
//! column may contain them.

mod io;
mod lagged;
mod scaler;

pub(crate) use io::format_timestamp;
pub use io::{read_series_csv, validate_series, write_imputed_csv, RawTable};
pub use lagged::{build_lagged_table, reduce_lagged_table, split_train_val, LaggedTable};
pub use scaler::{apply_scaler, fit_scaler, invert_target, Scaler};

use chrono::{Datelike, NaiveDateTime, TimeDelta, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default share of the reduced lagged table used for training.
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.85;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("csv: {0}")]
    Csv(String),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("S ≥ 2 required, got {0} row(s)")]
    TooShort(usize),
    #[error("row {row}: cannot parse timestamp `{value}`")]
    BadTimestamp { row: usize, value: String },
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    UnparseableCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("timestamps must increase with a constant step; first offending index {index}")]
    NonUniformStep { index: usize },
    #[error("supporting column `{column}` has a missing value at row {row}")]
    MissingSupport { column: String, row: usize },
    #[error("values matrix has {got} entries, expected {rows} x {cols}")]
    Shape {
        got: usize,
        rows: usize,
        cols: usize,
    },
    #[error("target index {0} out of range")]
    TargetIndex(usize),
    #[error("temporal features already present")]
    TemporalFeaturesPresent,
    #[error("column `{0}` has no observed value")]
    Unobserved(String),
    #[error("scaler has {scaler} columns, series has {series}")]
    ScalerMismatch { scaler: usize, series: usize },
    #[error("lag must be at least 1")]
    ZeroLag,
    #[error("series too short for lag {lag} (S = {rows})")]
    LagTooLarge { lag: usize, rows: usize },
    #[error("train fraction must lie in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("cannot split {rows} row(s) into train {train} / validation {val}")]
    EmptySplit {
        rows: usize,
        train: usize,
        val: usize,
    },
    #[error("target gap is not contiguous (missing at {first} and {next} but not between)")]
    NonContiguousGap { first: usize, next: usize },
    #[error("lagged table contains a missing entry at row {0}")]
    MissingInTable(usize),
}

/// Inclusive run of missing target rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapSpec {
    pub start_index: usize,
    pub end_index: usize,
    pub target_index: usize,
}

impl GapSpec {
    pub fn len(&self) -> usize {
        self.end_index - self.start_index + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, row: usize) -> bool {
        (self.start_index..=self.end_index).contains(&row)
    }
}

/// Uniform-step multivariate series with an optional missing run in the target.
#[derive(Debug, Clone, PartialEq)]
pub struct MultivariateSeries {
    timestamps: Vec<NaiveDateTime>,
    step: TimeDelta,
    names: Vec<String>,
    values: Vec<Option<f64>>,
    target_index: usize,
    temporal_columns: usize,
}

impl MultivariateSeries {
    /// Builds a series from row-major `values` and checks every structural
    /// invariant: `S >= 2`, constant positive step, supports fully observed.
    pub fn new(
        timestamps: Vec<NaiveDateTime>,
        names: Vec<String>,
        values: Vec<Option<f64>>,
        target_index: usize,
    ) -> Result<Self, SeriesError> {
        let rows = timestamps.len();
        let cols = names.len();
        if rows < 2 {
            return Err(SeriesError::TooShort(rows));
        }
        if values.len() != rows * cols {
            return Err(SeriesError::Shape {
                got: values.len(),
                rows,
                cols,
            });
        }
        if target_index >= cols {
            return Err(SeriesError::TargetIndex(target_index));
        }
        let step = timestamps[1] - timestamps[0];
        if step <= TimeDelta::zero() {
            return Err(SeriesError::NonUniformStep { index: 1 });
        }
        if let Some(index) = (2..rows).find(|&i| timestamps[i] - timestamps[i - 1] != step) {
            return Err(SeriesError::NonUniformStep { index });
        }
        for row in 0..rows {
            for col in (0..cols).filter(|&c| c != target_index) {
                if values[row * cols + col].is_none() {
                    return Err(SeriesError::MissingSupport {
                        column: names[col].clone(),
                        row,
                    });
                }
            }
        }
        Ok(Self {
            timestamps,
            step,
            names,
            values,
            target_index,
            temporal_columns: 0,
        })
    }

    /// Number of time steps `S`.
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Number of variables `N`, including appended temporal columns.
    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn step(&self) -> TimeDelta {
        self.step
    }

    pub fn target_index(&self) -> usize {
        self.target_index
    }

    pub fn target_name(&self) -> &str {
        &self.names[self.target_index]
    }

    /// Number of trailing columns added by [`add_temporal_features`].
    pub fn temporal_columns(&self) -> usize {
        self.temporal_columns
    }

    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        self.values[row * self.n_vars() + col]
    }

    pub fn row(&self, row: usize) -> &[Option<f64>] {
        let n = self.n_vars();
        &self.values[row * n..(row + 1) * n]
    }

    pub fn column(&self, col: usize) -> Vec<Option<f64>> {
        (0..self.len()).map(|r| self.value(r, col)).collect()
    }

    pub fn target(&self) -> Vec<Option<f64>> {
        self.column(self.target_index)
    }

    /// Whether every timestamp falls on midnight and the step is whole days.
    pub fn is_daily(&self) -> bool {
        self.step.num_seconds() % 86_400 == 0
            && self
                .timestamps
                .iter()
                .all(|t| t.time() == chrono::NaiveTime::MIN)
    }

    /// Returns a copy with the target column replaced.
    pub fn with_target(&self, target: &[Option<f64>]) -> Result<Self, SeriesError> {
        if target.len() != self.len() {
            return Err(SeriesError::Shape {
                got: target.len(),
                rows: self.len(),
                cols: 1,
            });
        }
        let mut out = self.clone();
        let n = self.n_vars();
        for (row, v) in target.iter().enumerate() {
            out.values[row * n + self.target_index] = *v;
        }
        Ok(out)
    }

    pub(crate) fn map_values(&self, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let n = self.n_vars();
        let mut out = self.clone();
        for (i, v) in out.values.iter_mut().enumerate() {
            *v = v.map(|x| f(i % n, x));
        }
        out
    }

    /// Locates the missing run in the target column.
    ///
    /// Returns `Ok(None)` when the target is fully observed and an error when
    /// the missing entries do not form one contiguous block.
    pub fn gap(&self) -> Result<Option<GapSpec>, SeriesError> {
        let missing: Vec<usize> = (0..self.len())
            .filter(|&r| self.value(r, self.target_index).is_none())
            .collect();
        let Some((&first, &last)) = missing.first().zip(missing.last()) else {
            return Ok(None);
        };
        if let Some(w) = missing.windows(2).find(|w| w[1] != w[0] + 1) {
            return Err(SeriesError::NonContiguousGap {
                first: w[0],
                next: w[1],
            });
        }
        Ok(Some(GapSpec {
            start_index: first,
            end_index: last,
            target_index: self.target_index,
        }))
    }
}

/// Appends month-of-year, day-of-month and, for sub-daily steps, hour-of-day
/// as fully observed supporting columns.
pub fn add_temporal_features(
    series: &MultivariateSeries,
) -> Result<MultivariateSeries, SeriesError> {
    if series.temporal_columns > 0 {
        return Err(SeriesError::TemporalFeaturesPresent);
    }
    let hourly = series.step < TimeDelta::days(1);
    let extra: &[&str] = if hourly {
        &["month", "day", "hour"]
    } else {
        &["month", "day"]
    };
    let old_n = series.n_vars();
    let new_n = old_n + extra.len();
    let mut values = Vec::with_capacity(series.len() * new_n);
    for (row, ts) in series.timestamps.iter().enumerate() {
        values.extend_from_slice(series.row(row));
        values.push(Some(f64::from(ts.month())));
        values.push(Some(f64::from(ts.day())));
        if hourly {
            values.push(Some(f64::from(ts.hour())));
        }
    }
    let mut names = series.names.clone();
    for name in extra {
        let mut candidate = (*name).to_string();
        let mut i = 2;
        while names.contains(&candidate) {
            candidate = format!("{name}_{i}");
            i += 1;
        }
        names.push(candidate);
    }
    Ok(MultivariateSeries {
        timestamps: series.timestamps.clone(),
        step: series.step,
        names,
        values,
        target_index: series.target_index,
        temporal_columns: extra.len(),
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use chrono::NaiveDate;

    pub(crate) fn daily(start: (i32, u32, u32), rows: usize) -> Vec<NaiveDateTime> {
        let d0 = NaiveDate::from_ymd_opt(start.0, start.1, start.2)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        (0..rows).map(|i| d0 + TimeDelta::days(i as i64)).collect()
    }

    pub(crate) fn series_from_columns(cols: &[Vec<Option<f64>>]) -> MultivariateSeries {
        let rows = cols[0].len();
        let names = (0..cols.len()).map(|i| format!("x{}", i + 1)).collect();
        let values = (0..rows)
            .flat_map(|r| cols.iter().map(move |c| c[r]))
            .collect();
        MultivariateSeries::new(daily((2012, 1, 1), rows), names, values, 0).unwrap()
    }

    #[test]
    fn rejects_non_uniform_step() {
        let mut ts = daily((2012, 1, 1), 4);
        ts[3] += TimeDelta::hours(1);
        let err = MultivariateSeries::new(ts, vec!["a".into()], vec![Some(1.0); 4], 0);
        assert_eq!(err, Err(SeriesError::NonUniformStep { index: 3 }));
    }

    #[test]
    fn gap_detection() {
        let s = series_from_columns(&[vec![Some(1.0), None, None, Some(2.0), Some(3.0)]]);
        assert_eq!(
            s.gap().unwrap(),
            Some(GapSpec {
                start_index: 1,
                end_index: 2,
                target_index: 0
            })
        );
        let s = series_from_columns(&[vec![Some(1.0), None, Some(2.0), None]]);
        assert!(matches!(
            s.gap(),
            Err(SeriesError::NonContiguousGap { first: 1, next: 3 })
        ));
        let s = series_from_columns(&[vec![Some(1.0), Some(2.0)]]);
        assert_eq!(s.gap().unwrap(), None);
    }

    #[test]
    fn daily_temporal_features() {
        let s = series_from_columns(&[vec![Some(0.0); 40], vec![Some(1.0); 40]]);
        let t = add_temporal_features(&s).unwrap();
        assert_eq!(t.n_vars(), 4);
        assert_eq!(t.target_index(), 0);
        assert_eq!(&t.names()[2..], ["month", "day"]);
        let month = t.column(2);
        let day = t.column(3);
        assert_eq!(month[0], Some(1.0));
        assert_eq!(month[30], Some(1.0));
        assert_eq!(month[31], Some(2.0));
        assert_eq!(&day[..3], &[Some(1.0), Some(2.0), Some(3.0)]);
        assert_eq!(day[31], Some(1.0));
    }

    #[test]
    fn hourly_temporal_features_cycle_hours() {
        let t0 = NaiveDate::from_ymd_opt(2015, 3, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        let ts: Vec<_> = (0..50).map(|i| t0 + TimeDelta::hours(i)).collect();
        let s = MultivariateSeries::new(ts, vec!["nee".into()], vec![Some(0.5); 50], 0).unwrap();
        let t = add_temporal_features(&s).unwrap();
        assert_eq!(t.n_vars(), 4);
        let hour = t.column(3);
        let expected: Vec<_> = (0..50).map(|i| Some(f64::from(i % 24))).collect();
        assert_eq!(hour, expected);
        assert_eq!(t.column(2)[49], Some(3.0));
        assert_eq!(t.column(2)[24], Some(2.0));
        assert_eq!(t.column(1)[24], Some(3.0));
    }

    #[test]
    fn temporal_features_twice_is_an_error() {
        let s = series_from_columns(&[vec![Some(0.0); 3]]);
        let t = add_temporal_features(&s).unwrap();
        assert_eq!(
            add_temporal_features(&t),
            Err(SeriesError::TemporalFeaturesPresent)
        );
        assert_eq!(
            SeriesError::TemporalFeaturesPresent.to_string(),
            "temporal features already present"
        );
    }
}
