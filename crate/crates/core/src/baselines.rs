//! Univariate reference gap-fillers operating on the target column alone.
//!
//! Every function leaves observed entries untouched and fills every missing
//! one, or fails.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("no observed value before the missing entry at row {0}")]
    NoPrecedingValue(usize),
    #[error("missing entry at row {0} has no observed value on one side")]
    OneSided(usize),
    #[error("seasonal frequency must be at least 2, got {0}")]
    BadFrequency(usize),
    #[error("series of length {len} is shorter than one season ({frequency})")]
    ShorterThanSeason { len: usize, frequency: usize },
    #[error("column has no observed value")]
    Unobserved,
}

/// A filled column plus any fallbacks that were taken.
#[derive(Debug, Clone, PartialEq)]
pub struct Fill {
    pub values: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Fill {
    fn plain(values: Vec<f64>) -> Self {
        Self {
            values,
            warnings: Vec::new(),
        }
    }
}

fn observed(column: &[Option<f64>]) -> Vec<(usize, f64)> {
    column
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|x| (i, x)))
        .collect()
}

/// Last observation carried forward.
pub fn locf(column: &[Option<f64>]) -> Result<Fill, BaselineError> {
    let mut last = None;
    let mut out = Vec::with_capacity(column.len());
    for (i, v) in column.iter().enumerate() {
        match v {
            Some(x) => {
                last = Some(*x);
                out.push(*x);
            }
            None => out.push(last.ok_or(BaselineError::NoPrecedingValue(i))?),
        }
    }
    Ok(Fill::plain(out))
}

/// Straight line between the nearest observations on either side.
pub fn interpolate_linear(column: &[Option<f64>]) -> Result<Fill, BaselineError> {
    let mut out = Vec::with_capacity(column.len());
    let mut prev: Option<(usize, f64)> = None;
    let mut i = 0;
    while i < column.len() {
        match column[i] {
            Some(x) => {
                out.push(x);
                prev = Some((i, x));
                i += 1;
            }
            None => {
                let (i0, y0) = prev.ok_or(BaselineError::OneSided(i))?;
                let j = (i..column.len())
                    .find(|&j| column[j].is_some())
                    .ok_or(BaselineError::OneSided(i))?;
                let y1 = column[j].expect("observed");
                let span = (j - i0) as f64;
                for m in i..j {
                    let f = (m - i0) as f64 / span;
                    out.push(y0 + (y1 - y0) * f);
                }
                i = j;
            }
        }
    }
    Ok(Fill::plain(out))
}

/// Natural cubic spline through `(xs, ys)`: second derivatives at the knots
/// from the tridiagonal system (Thomas algorithm), zero at both ends.
struct NaturalSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    m: Vec<f64>,
}

impl NaturalSpline {
    fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h[i + 1] - (ys[i + 1] - ys[i]) / h[i]);
            }
            // Forward sweep; sub- and super-diagonal of row i are h[i] and h[i + 1].
            for i in 1..k {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * h[i];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - h[i + 1] * m[i + 2]) / diag[i];
            }
        }
        Self { xs, ys, m }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let (a, b) = ((x1 - x) / h, (x - x0) / h);
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

/// Natural cubic spline through every observed point, evaluated at the
/// missing rows. Fewer than four observations fall back to linear.
pub fn interpolate_spline(column: &[Option<f64>]) -> Result<Fill, BaselineError> {
    let obs = observed(column);
    if obs.len() < 4 {
        let mut fill = interpolate_linear(column)?;
        fill.warnings.push(format!(
            "only {} observed value(s); spline replaced by linear interpolation",
            obs.len()
        ));
        return Ok(fill);
    }
    let (first, last) = (obs[0].0, obs[obs.len() - 1].0);
    if let Some(i) = column
        .iter()
        .enumerate()
        .position(|(i, v)| v.is_none() && (i < first || i > last))
    {
        return Err(BaselineError::OneSided(i));
    }
    let spline = NaturalSpline::new(
        obs.iter().map(|&(i, _)| i as f64).collect(),
        obs.iter().map(|&(_, y)| y).collect(),
    );
    let values = column
        .iter()
        .enumerate()
        .map(|(i, v)| v.unwrap_or_else(|| spline.eval(i as f64)))
        .collect();
    Ok(Fill::plain(values))
}

/// Mean level per phase of a season of `frequency` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalProfile {
    pub frequency: usize,
    /// Per-phase mean minus the global observed mean.
    pub means: Vec<f64>,
}

impl SeasonalProfile {
    /// Phase of row `i` is `i % frequency`. Phases without observations take
    /// the global mean, so their centered component is zero.
    pub fn fit(column: &[Option<f64>], frequency: usize) -> Result<Self, BaselineError> {
        if frequency < 2 {
            return Err(BaselineError::BadFrequency(frequency));
        }
        let obs = observed(column);
        if obs.is_empty() {
            return Err(BaselineError::Unobserved);
        }
        let global = obs.iter().map(|&(_, y)| y).sum::<f64>() / obs.len() as f64;
        let mut sum = vec![0.0; frequency];
        let mut count = vec![0usize; frequency];
        for &(i, y) in &obs {
            sum[i % frequency] += y;
            count[i % frequency] += 1;
        }
        let means = sum
            .iter()
            .zip(&count)
            .map(|(&s, &c)| if c > 0 { s / c as f64 - global } else { 0.0 })
            .collect();
        Ok(Self { frequency, means })
    }

    pub fn at(&self, row: usize) -> f64 {
        self.means[row % self.frequency]
    }
}

/// Removes the seasonal profile, interpolates the remainder linearly across
/// the gap, and adds the profile back.
pub fn seasonal_interpolate(
    column: &[Option<f64>],
    frequency: usize,
) -> Result<Fill, BaselineError> {
    if column.len() < frequency {
        return Err(BaselineError::ShorterThanSeason {
            len: column.len(),
            frequency,
        });
    }
    let profile = SeasonalProfile::fit(column, frequency)?;
    let residual: Vec<Option<f64>> = column
        .iter()
        .enumerate()
        .map(|(i, v)| v.map(|x| x - profile.at(i)))
        .collect();
    let filled = interpolate_linear(&residual)?;
    let values = column
        .iter()
        .zip(filled.values)
        .enumerate()
        .map(|(i, (v, r))| v.unwrap_or(r + profile.at(i)))
        .collect();
    Ok(Fill::plain(values))
}
