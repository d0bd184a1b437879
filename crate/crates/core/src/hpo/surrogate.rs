//! Cheap approximations of the hyperparameter -> validation-MSE map.
//!
//! Both models work on points already scaled to the unit cube.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::HpoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateKind {
    Rbf,
    Gp,
}

impl std::fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Rbf => "rbf",
            Self::Gp => "gp",
        })
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Keeps the first occurrence of each point.
fn dedup(points: &[Vec<f64>], values: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut p: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    let mut v = Vec::with_capacity(values.len());
    for (x, &y) in points.iter().zip(values) {
        if !p.iter().any(|q| q == x) {
            p.push(x.clone());
            v.push(y);
        }
    }
    (p, v)
}

fn check_inputs(points: &[Vec<f64>], values: &[f64]) -> Result<usize, HpoError> {
    if points.len() != values.len() {
        return Err(HpoError::Surrogate(format!(
            "{} points but {} values",
            points.len(),
            values.len()
        )));
    }
    let dim = points.first().map_or(0, Vec::len);
    if dim == 0 || points.iter().any(|p| p.len() != dim) {
        return Err(HpoError::Surrogate(
            "points must share a positive dimension".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(HpoError::Surrogate(
            "surrogate values must be finite".into(),
        ));
    }
    Ok(dim)
}

/// Cubic radial basis interpolant `sum_i lambda_i |x - x_i|^3 + c_0 + c^T x`.
///
/// The linear tail only spans coordinates that vary across the centers; a
/// coordinate shared by every center would make the augmented system singular.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfModel {
    centers: Vec<Vec<f64>>,
    weights: Vec<f64>,
    tail_dims: Vec<usize>,
    tail: Vec<f64>,
}

impl RbfModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let radial: f64 = self
            .centers
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * sq_dist(x, c).sqrt().powi(3))
            .sum();
        let linear: f64 = self
            .tail_dims
            .iter()
            .zip(&self.tail[1..])
            .map(|(&d, c)| c * x[d])
            .sum();
        radial + self.tail[0] + linear
    }

    pub fn n_centers(&self) -> usize {
        self.centers.len()
    }
}

/// Solves the augmented system `[[Phi, P], [P^T, 0]] [lambda; c] = [f; 0]`.
pub fn fit_rbf(points: &[Vec<f64>], values: &[f64]) -> Result<RbfModel, HpoError> {
    let dim = check_inputs(points, values)?;
    let (centers, f) = dedup(points, values);
    let n = centers.len();
    if n < dim + 2 {
        return Err(HpoError::TooFewPoints {
            need: dim + 2,
            got: n,
        });
    }
    let tail_dims: Vec<usize> = (0..dim)
        .filter(|&d| centers.iter().any(|c| c[d] != centers[0][d]))
        .collect();
    let q = 1 + tail_dims.len();
    let size = n + q;
    let mut a = DMatrix::<f64>::zeros(size, size);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = sq_dist(&centers[i], &centers[j]).sqrt().powi(3);
        }
        a[(i, n)] = 1.0;
        a[(n, i)] = 1.0;
        for (k, &d) in tail_dims.iter().enumerate() {
            a[(i, n + 1 + k)] = centers[i][d];
            a[(n + 1 + k, i)] = centers[i][d];
        }
    }
    let mut b = DVector::<f64>::zeros(size);
    for i in 0..n {
        b[i] = f[i];
    }
    let sol = a
        .clone()
        .full_piv_lu()
        .solve(&b)
        .ok_or(HpoError::Singular)?;
    let residual = (&a * &sol - &b).amax();
    if !residual.is_finite() || residual > 1e-9 * b.amax().max(1.0) {
        return Err(HpoError::Singular);
    }
    Ok(RbfModel {
        centers,
        weights: sol.rows(0, n).iter().copied().collect(),
        tail_dims,
        tail: sol.rows(n, q).iter().copied().collect(),
    })
}

/// Zero-mean Gaussian process on standardized values with an isotropic
/// squared-exponential kernel `s2 * exp(-r^2 / (2 l^2))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GpModel {
    centers: Vec<Vec<f64>>,
    alpha: DVector<f64>,
    chol_l: DMatrix<f64>,
    pub length_scale: f64,
    pub signal_variance: f64,
    pub nugget: f64,
    pub y_mean: f64,
    pub y_std: f64,
    pub log_marginal_likelihood: f64,
}

pub const GP_NUGGET: f64 = 1e-8;
const GP_MAX_NUGGET: f64 = 1e-2;

fn length_scale_grid() -> impl Iterator<Item = f64> {
    (0..=16).map(|i| 10f64.powf(-1.5 + 0.125 * f64::from(i)))
}

fn signal_variance_grid() -> impl Iterator<Item = f64> {
    (0..=8).map(|i| 10f64.powf(-1.0 + 0.25 * f64::from(i)))
}

impl GpModel {
    fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        self.signal_variance * (-sq_dist(a, b) / (2.0 * self.length_scale.powi(2))).exp()
    }

    /// Fits with fixed kernel hyperparameters, escalating the nugget by
    /// decades up to `1e-2` if the covariance is not numerically positive
    /// definite.
    pub fn fit_with(
        points: &[Vec<f64>],
        values: &[f64],
        length_scale: f64,
        signal_variance: f64,
        nugget: f64,
    ) -> Result<Self, HpoError> {
        check_inputs(points, values)?;
        let (centers, f) = dedup(points, values);
        let n = centers.len();
        let y_mean = f.iter().sum::<f64>() / n as f64;
        let var = f.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_std = if var > 0.0 { var.sqrt() } else { 1.0 };
        let y = DVector::from_iterator(n, f.iter().map(|v| (v - y_mean) / y_std));

        let mut model = Self {
            centers,
            alpha: DVector::zeros(n),
            chol_l: DMatrix::zeros(n, n),
            length_scale,
            signal_variance,
            nugget,
            y_mean,
            y_std,
            log_marginal_likelihood: f64::NEG_INFINITY,
        };
        let base = DMatrix::from_fn(n, n, |i, j| {
            model.kernel(&model.centers[i], &model.centers[j])
        });
        let mut eps = nugget;
        loop {
            let k = &base + DMatrix::identity(n, n) * eps;
            if let Some(chol) = k.cholesky() {
                model.alpha = chol.solve(&y);
                model.chol_l = chol.l();
                model.nugget = eps;
                let log_det: f64 = model.chol_l.diagonal().iter().map(|d| d.ln()).sum();
                model.log_marginal_likelihood = -0.5 * y.dot(&model.alpha)
                    - log_det
                    - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
                return Ok(model);
            }
            eps *= 10.0;
            if eps > GP_MAX_NUGGET * 1.000_001 {
                return Err(HpoError::Cholesky);
            }
        }
    }

    /// Posterior mean and variance in standardized units.
    pub fn predict_standardized(&self, x: &[f64]) -> (f64, f64) {
        let k = DVector::from_iterator(
            self.centers.len(),
            self.centers.iter().map(|c| self.kernel(x, c)),
        );
        let mean = k.dot(&self.alpha);
        let v = self
            .chol_l
            .solve_lower_triangular(&k)
            .expect("Cholesky factor has a positive diagonal");
        let var = (self.signal_variance - v.dot(&v)).max(0.0);
        (mean, var)
    }

    /// Posterior mean in the units of the fitted values.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.predict_standardized(x).0 * self.y_std + self.y_mean
    }

    pub fn standardize(&self, v: f64) -> f64 {
        (v - self.y_mean) / self.y_std
    }
}

/// Chooses length scale and signal variance by maximizing the log marginal
/// likelihood over a fixed logarithmic grid (nugget `1e-8`).
pub fn fit_gp(points: &[Vec<f64>], values: &[f64]) -> Result<GpModel, HpoError> {
    let dim = check_inputs(points, values)?;
    let n = dedup(points, values).0.len();
    if n < dim + 2 {
        return Err(HpoError::TooFewPoints {
            need: dim + 2,
            got: n,
        });
    }
    fit_gp_any(points, values)
}

pub(crate) fn fit_gp_any(points: &[Vec<f64>], values: &[f64]) -> Result<GpModel, HpoError> {
    let mut best: Option<GpModel> = None;
    for l in length_scale_grid() {
        for s2 in signal_variance_grid() {
            let Ok(m) = GpModel::fit_with(points, values, l, s2, GP_NUGGET) else {
                continue;
            };
            if best
                .as_ref()
                .is_none_or(|b| m.log_marginal_likelihood > b.log_marginal_likelihood)
            {
                best = Some(m);
            }
        }
    }
    best.ok_or(HpoError::Cholesky)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Surrogate {
    Rbf(RbfModel),
    Gp(GpModel),
}

impl Surrogate {
    pub fn fit(kind: SurrogateKind, points: &[Vec<f64>], values: &[f64]) -> Result<Self, HpoError> {
        Ok(match kind {
            SurrogateKind::Rbf => Self::Rbf(fit_rbf(points, values)?),
            SurrogateKind::Gp => Self::Gp(fit_gp(points, values)?),
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Self::Rbf(m) => m.predict(x),
            Self::Gp(m) => m.predict(x),
        }
    }
}
