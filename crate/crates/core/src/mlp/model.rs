use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::MlpError;

/// The six tuned hyperparameters. Every hidden layer shares `nodes_per_layer`
/// and `dropout_rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub batch_size: usize,
    pub epochs: usize,
    pub layers: usize,
    pub nodes_per_layer: usize,
    pub dropout_rate: f64,
    pub lag: usize,
}

impl MlpArchitecture {
    pub fn validate(&self) -> Result<(), MlpError> {
        let bad = |m: &str| Err(MlpError::InvalidArchitecture(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.layers == 0 || self.nodes_per_layer == 0 {
            return bad("at least one hidden layer with one node is required");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        Ok(())
    }

    /// `[batch, epochs, layers, nodes, dropout, lag]`, the order used in reports.
    pub fn as_row(&self) -> [String; 6] {
        [
            self.batch_size.to_string(),
            self.epochs.to_string(),
            self.layers.to_string(),
            self.nodes_per_layer.to_string(),
            format!("{:.1}", self.dropout_rate),
            self.lag.to_string(),
        ]
    }
}

/// Fully connected layer; `weights` is `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weights.t()) + &self.bias
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Per-hidden-layer multiplicative masks, `batch x nodes`, holding either 0
/// or `1 / (1 - rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks(pub Vec<Array2<f64>>);

impl DropoutMasks {
    pub fn ones(model: &MlpModel, batch: usize) -> Self {
        Self(
            model
                .hidden_layers()
                .iter()
                .map(|l| Array2::ones((batch, l.outputs())))
                .collect(),
        )
    }

    pub fn sample<R: Rng>(model: &MlpModel, batch: usize, rng: &mut R) -> Self {
        let rate = model.architecture.dropout_rate;
        if rate == 0.0 {
            return Self::ones(model, batch);
        }
        let keep = 1.0 / (1.0 - rate);
        Self(
            model
                .hidden_layers()
                .iter()
                .map(|l| {
                    Array2::from_shape_simple_fn((batch, l.outputs()), || {
                        if rng.gen::<f64>() < rate {
                            0.0
                        } else {
                            keep
                        }
                    })
                })
                .collect(),
        )
    }
}

/// Intermediate values of a batch forward pass kept for backpropagation.
pub(crate) struct ForwardCache {
    /// Layer inputs: `activations[0]` is the batch itself.
    pub activations: Vec<Array2<f64>>,
    /// Hidden pre-activations.
    pub pre: Vec<Array2<f64>>,
    pub output: Array1<f64>,
}

/// Feed-forward regression network: ReLU hidden layers and one linear output node.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<DenseLayer>,
    pub architecture: MlpArchitecture,
    pub input_width: usize,
    pub seed: u64,
}

impl MlpModel {
    /// Assembles a model from explicit layers, checking that shapes chain.
    pub fn from_parts(
        architecture: MlpArchitecture,
        input_width: usize,
        layers: Vec<DenseLayer>,
        seed: u64,
    ) -> Result<Self, MlpError> {
        let shape_err = |m: String| Err(MlpError::Shape(m));
        if layers.len() < 2 {
            return shape_err("need at least one hidden layer and an output layer".into());
        }
        let mut width = input_width;
        for (i, l) in layers.iter().enumerate() {
            if l.inputs() != width {
                return shape_err(format!(
                    "layer {i} expects {} inputs, previous width is {width}",
                    l.inputs()
                ));
            }
            if l.bias.len() != l.outputs() {
                return shape_err(format!("layer {i} bias length mismatch"));
            }
            width = l.outputs();
        }
        if width != 1 {
            return shape_err(format!("output layer has {width} nodes, expected 1"));
        }
        Ok(Self {
            layers,
            architecture,
            input_width,
            seed,
        })
    }

    pub fn hidden_layers(&self) -> &[DenseLayer] {
        &self.layers[..self.layers.len() - 1]
    }

    pub fn n_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    fn check_width(&self, got: usize) -> Result<(), MlpError> {
        if got != self.input_width {
            return Err(MlpError::WidthMismatch {
                expected: self.input_width,
                got,
            });
        }
        Ok(())
    }

    pub(crate) fn forward_cached(&self, x: ArrayView2<f64>, masks: &DropoutMasks) -> ForwardCache {
        let hidden = self.hidden_layers();
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(hidden.len());
        activations.push(x.to_owned());
        for (layer, mask) in hidden.iter().zip(&masks.0) {
            let z = layer.apply(activations.last().expect("non-empty").view());
            let mut h = z.mapv(|v| v.max(0.0));
            h *= mask;
            pre.push(z);
            activations.push(h);
        }
        let last = self.layers.last().expect("output layer");
        let output = last
            .apply(activations.last().expect("non-empty").view())
            .index_axis_move(Axis(1), 0);
        ForwardCache {
            activations,
            pre,
            output,
        }
    }

    /// Batch inference (dropout disabled).
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>, MlpError> {
        self.check_width(x.ncols())?;
        let mut a = x.to_owned();
        for layer in self.hidden_layers() {
            a = layer.apply(a.view()).mapv(|v| v.max(0.0));
        }
        let last = self.layers.last().expect("output layer");
        Ok(last.apply(a.view()).index_axis_move(Axis(1), 0))
    }
}

/// He-style initialization: weights `N(0, 2 / fan_in)`, biases zero.
pub fn init_model(
    arch: &MlpArchitecture,
    input_width: usize,
    seed: u64,
) -> Result<MlpModel, MlpError> {
    arch.validate()?;
    if input_width == 0 {
        return Err(MlpError::Shape("input width must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut widths = vec![input_width];
    widths.extend(std::iter::repeat(arch.nodes_per_layer).take(arch.layers));
    widths.push(1);
    let layers = widths
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            DenseLayer {
                weights: Array2::from_shape_simple_fn((fan_out, fan_in), || {
                    normal.sample(&mut rng)
                }),
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    MlpModel::from_parts(*arch, input_width, layers, seed)
}

/// Single-row forward pass. In [`Mode::Train`] a dropout mask is drawn from
/// `dropout_seed`; in [`Mode::Infer`] the seed is ignored.
pub fn forward(
    model: &MlpModel,
    input_row: ArrayView1<f64>,
    mode: Mode,
    dropout_seed: u64,
) -> Result<f64, MlpError> {
    model.check_width(input_row.len())?;
    let x = input_row.insert_axis(Axis(0));
    let masks = match mode {
        Mode::Infer => DropoutMasks::ones(model, 1),
        Mode::Train => DropoutMasks::sample(model, 1, &mut ChaCha8Rng::seed_from_u64(dropout_seed)),
    };
    Ok(model.forward_cached(x, &masks).output[0])
}

// Persistence as nested arrays: `weights[out][in]`.
#[derive(Serialize, Deserialize)]
struct LayerRepr {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ModelRepr {
    architecture: MlpArchitecture,
    input_width: usize,
    seed: u64,
    layers: Vec<LayerRepr>,
}

impl From<&MlpModel> for ModelRepr {
    fn from(m: &MlpModel) -> Self {
        Self {
            architecture: m.architecture,
            input_width: m.input_width,
            seed: m.seed,
            layers: m
                .layers
                .iter()
                .map(|l| LayerRepr {
                    weights: l.weights.outer_iter().map(|r| r.to_vec()).collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<ModelRepr> for MlpModel {
    type Error = MlpError;

    fn try_from(r: ModelRepr) -> Result<Self, MlpError> {
        let layers = r
            .layers
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                let rows = l.weights.len();
                let cols = l.weights.first().map_or(0, Vec::len);
                if l.weights.iter().any(|row| row.len() != cols) {
                    return Err(MlpError::Shape(format!("layer {i} weights are ragged")));
                }
                let flat = l.weights.into_iter().flatten().collect();
                Ok(DenseLayer {
                    weights: Array2::from_shape_vec((rows, cols), flat)
                        .map_err(|e| MlpError::Shape(e.to_string()))?,
                    bias: Array1::from(l.bias),
                })
            })
            .collect::<Result<_, _>>()?;
        let model = MlpModel::from_parts(r.architecture, r.input_width, layers, r.seed)?;
        if model.hidden_layers().len() != r.architecture.layers {
            return Err(MlpError::Shape(format!(
                "architecture lists {} hidden layers, document has {}",
                r.architecture.layers,
                model.hidden_layers().len()
            )));
        }
        if !model.is_finite() {
            return Err(MlpError::NonFiniteParameters);
        }
        Ok(model)
    }
}

impl Serialize for MlpModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ModelRepr::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for MlpModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = ModelRepr::deserialize(d)?;
        MlpModel::try_from(repr).map_err(serde::de::Error::custom)
    }
}
