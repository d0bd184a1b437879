use ndarray::{Array1, Array2};

use super::{MultivariateSeries, SeriesError};

/// Supervised view of a series: each row holds the `lag + 1` observation
/// vectors preceding time `t`, and the output is the target at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedTable {
    inputs: Vec<Option<f64>>,
    outputs: Vec<Option<f64>>,
    row_origin: Vec<usize>,
    lag: usize,
    width: usize,
}

impl LaggedTable {
    pub fn rows(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    /// Input width, `(lag + 1) * N`.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn input_row(&self, row: usize) -> &[Option<f64>] {
        &self.inputs[row * self.width..(row + 1) * self.width]
    }

    pub fn output(&self, row: usize) -> Option<f64> {
        self.outputs[row]
    }

    pub fn outputs(&self) -> &[Option<f64>] {
        &self.outputs
    }

    /// Time index (0-based row of the series) predicted by each table row.
    pub fn row_origin(&self) -> &[usize] {
        &self.row_origin
    }

    fn row_has_missing(&self, row: usize) -> bool {
        self.outputs[row].is_none() || self.input_row(row).iter().any(Option::is_none)
    }

    fn select(&self, rows: impl Iterator<Item = usize>) -> Self {
        let mut out = Self {
            inputs: Vec::new(),
            outputs: Vec::new(),
            row_origin: Vec::new(),
            lag: self.lag,
            width: self.width,
        };
        for r in rows {
            out.inputs.extend_from_slice(self.input_row(r));
            out.outputs.push(self.outputs[r]);
            out.row_origin.push(self.row_origin[r]);
        }
        out
    }

    /// Dense copy for training; fails if any entry is missing.
    pub fn to_dense(&self) -> Result<(Array2<f64>, Array1<f64>), SeriesError> {
        if let Some(r) = (0..self.rows()).find(|&r| self.row_has_missing(r)) {
            return Err(SeriesError::MissingInTable(r));
        }
        let x = Array2::from_shape_vec(
            (self.rows(), self.width),
            self.inputs.iter().map(|v| v.unwrap_or_default()).collect(),
        )
        .expect("table shape is consistent");
        let y = self.outputs.iter().map(|v| v.unwrap_or_default()).collect();
        Ok((x, y))
    }
}

pub fn build_lagged_table(
    series: &MultivariateSeries,
    lag: usize,
) -> Result<LaggedTable, SeriesError> {
    let s = series.len();
    if lag == 0 {
        return Err(SeriesError::ZeroLag);
    }
    if lag + 2 > s {
        return Err(SeriesError::LagTooLarge { lag, rows: s });
    }
    let n = series.n_vars();
    let width = (lag + 1) * n;
    let rows = s - lag - 1;
    let mut inputs = Vec::with_capacity(rows * width);
    let mut outputs = Vec::with_capacity(rows);
    let mut row_origin = Vec::with_capacity(rows);
    for t in (lag + 1)..s {
        for step in (t - lag - 1)..t {
            inputs.extend_from_slice(series.row(step));
        }
        outputs.push(series.value(t, series.target_index()));
        row_origin.push(t);
    }
    Ok(LaggedTable {
        inputs,
        outputs,
        row_origin,
        lag,
        width,
    })
}

/// Drops every row with a missing entry in its input or output.
pub fn reduce_lagged_table(table: &LaggedTable) -> LaggedTable {
    table.select((0..table.rows()).filter(|&r| !table.row_has_missing(r)))
}

/// Chronological split: the earliest `ceil(fraction * R)` rows train.
pub fn split_train_val(
    table: &LaggedTable,
    train_fraction: f64,
) -> Result<(LaggedTable, LaggedTable), SeriesError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(SeriesError::BadFraction(train_fraction));
    }
    let rows = table.rows();
    // Guard against products like 0.85 * 100 landing a hair above an integer.
    let train = ((train_fraction * rows as f64) - 1e-9).ceil().max(0.0) as usize;
    let train = train.min(rows);
    let val = rows - train;
    if rows < 2 || train == 0 || val == 0 {
        return Err(SeriesError::EmptySplit { rows, train, val });
    }
    // Rows are produced in ascending origin order and reduction keeps order.
    debug_assert!(table.row_origin.windows(2).all(|w| w[0] < w[1]));
    Ok((table.select(0..train), table.select(train..rows)))
}
