use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{init_model, DropoutMasks, MlpArchitecture, MlpModel};
use super::MlpError;
use crate::series::LaggedTable;

/// Optimizer settings. Learning rate and Adam moments are fixed, not tuned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub shuffle: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            shuffle: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<(), MlpError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(MlpError::BadConfig("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(MlpError::BadConfig("Adam betas must lie in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(MlpError::BadConfig("epsilon must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Gradient of the batch MSE with respect to every weight and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    fn zeros_like(model: &MlpModel) -> Vec<LayerGradient> {
        model
            .layers
            .iter()
            .map(|l| LayerGradient {
                weights: Array2::zeros(l.weights.raw_dim()),
                bias: Array1::zeros(l.bias.len()),
            })
            .collect()
    }
}

pub fn mse(predictions: &[f64], targets: &[f64]) -> Result<f64, MlpError> {
    if predictions.len() != targets.len() {
        return Err(MlpError::LengthMismatch(predictions.len(), targets.len()));
    }
    if predictions.is_empty() {
        return Err(MlpError::Empty);
    }
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / predictions.len() as f64)
}

/// Reverse-mode gradients of the batch MSE under fixed dropout masks.
/// The ReLU derivative at exactly zero is taken as zero.
pub fn gradients(
    model: &MlpModel,
    inputs: ArrayView2<f64>,
    targets: ArrayView1<f64>,
    masks: &DropoutMasks,
) -> Gradients {
    let batch = inputs.nrows();
    let cache = model.forward_cached(inputs, masks);
    let residual = &cache.output - &targets;
    let loss = residual.dot(&residual) / batch as f64;

    let mut grads = Gradients {
        loss,
        layers: Gradients::zeros_like(model),
    };
    // dL/d(output), batch x 1
    let mut delta: Array2<f64> = (residual * (2.0 / batch as f64)).insert_axis(Axis(1));
    for i in (0..model.layers.len()).rev() {
        let a_prev = &cache.activations[i];
        grads.layers[i].weights = delta.t().dot(a_prev);
        grads.layers[i].bias = delta.sum_axis(Axis(0));
        if i == 0 {
            break;
        }
        let mut back = delta.dot(&model.layers[i].weights);
        let z = &cache.pre[i - 1];
        let mask = &masks.0[i - 1];
        ndarray::Zip::from(&mut back)
            .and(z)
            .and(mask)
            .for_each(|d, &z, &m| *d *= if z > 0.0 { m } else { 0.0 });
        delta = back;
    }
    grads
}

/// One Adam update on a flat parameter slice; `t` is the 1-based step count.
pub fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    config: &TrainConfig,
    t: u64,
) {
    let (b1, b2) = (config.beta1, config.beta2);
    let step = config.learning_rate / (1.0 - b1.powf(t as f64));
    let inv_c2 = 1.0 / (1.0 - b2.powf(t as f64));
    let eps = config.epsilon;
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p -= step * *m / ((*v * inv_c2).sqrt() + eps);
    }
}

/// First and second moment estimates for every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<LayerGradient>,
    v: Vec<LayerGradient>,
    t: u64,
}

impl AdamState {
    pub fn new(model: &MlpModel) -> Self {
        Self {
            m: Gradients::zeros_like(model),
            v: Gradients::zeros_like(model),
            t: 0,
        }
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, model: &mut MlpModel, grads: &Gradients, config: &TrainConfig) {
        self.t += 1;
        let t = self.t;
        for (i, layer) in model.layers.iter_mut().enumerate() {
            let g = &grads.layers[i];
            adam_update(
                layer.weights.as_slice_mut().expect("standard layout"),
                g.weights.as_slice().expect("standard layout"),
                self.m[i].weights.as_slice_mut().expect("standard layout"),
                self.v[i].weights.as_slice_mut().expect("standard layout"),
                config,
                t,
            );
            adam_update(
                layer.bias.as_slice_mut().expect("standard layout"),
                g.bias.as_slice().expect("standard layout"),
                self.m[i].bias.as_slice_mut().expect("standard layout"),
                self.v[i].bias.as_slice_mut().expect("standard layout"),
                config,
                t,
            );
        }
    }
}

/// Trains a fresh model on dense data: `epochs x ceil(R / batch)` Adam steps
/// over (optionally shuffled) mini-batches, the last of which may be short.
pub fn fit(
    inputs: ArrayView2<f64>,
    targets: ArrayView1<f64>,
    arch: &MlpArchitecture,
    config: &TrainConfig,
) -> Result<(MlpModel, AdamState), MlpError> {
    config.validate()?;
    let rows = inputs.nrows();
    if rows == 0 {
        return Err(MlpError::Empty);
    }
    if targets.len() != rows {
        return Err(MlpError::LengthMismatch(rows, targets.len()));
    }
    let mut model = init_model(arch, inputs.ncols(), config.seed)?;
    let mut adam = AdamState::new(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(config.seed, &[0xba7c]));
    let mut order: Vec<usize> = (0..rows).collect();
    for epoch in 0..arch.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(arch.batch_size) {
            let (x, y) = if chunk.len() == rows && !config.shuffle {
                (inputs.to_owned(), targets.to_owned())
            } else {
                (
                    inputs.select(Axis(0), chunk),
                    targets.select(Axis(0), chunk),
                )
            };
            let masks = DropoutMasks::sample(&model, chunk.len(), &mut rng);
            let grads = gradients(&model, x.view(), y.view(), &masks);
            if !grads.loss.is_finite() {
                return Err(MlpError::NonFiniteLoss { epoch });
            }
            adam.step(&mut model, &grads, config);
        }
    }
    if !model.is_finite() {
        return Err(MlpError::NonFiniteParameters);
    }
    Ok((model, adam))
}

/// A trained model with its validation MSE (normalized units).
#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub model: MlpModel,
    pub val_mse: f64,
}

/// Trains on `train` and scores on `val` in inference mode.
pub fn train(
    train: &LaggedTable,
    val: &LaggedTable,
    arch: &MlpArchitecture,
    config: &TrainConfig,
) -> Result<Trained, MlpError> {
    if train.is_empty() || val.is_empty() {
        return Err(MlpError::Empty);
    }
    for t in [train, val] {
        if t.lag() != arch.lag {
            return Err(MlpError::InvalidArchitecture(format!(
                "table built with lag {}, architecture has lag {}",
                t.lag(),
                arch.lag
            )));
        }
    }
    if train.width() != val.width() {
        return Err(MlpError::WidthMismatch {
            expected: train.width(),
            got: val.width(),
        });
    }
    let (x, y) = train.to_dense()?;
    let (model, _) = fit(x.view(), y.view(), arch, config)?;
    let (vx, vy) = val.to_dense()?;
    let pred = model.predict(vx.view())?;
    let val_mse = mse(
        pred.as_slice().expect("contiguous"),
        vy.as_slice().expect("contiguous"),
    )?;
    if !val_mse.is_finite() {
        return Err(MlpError::NonFiniteLoss { epoch: arch.epochs });
    }
    Ok(Trained { model, val_mse })
}
