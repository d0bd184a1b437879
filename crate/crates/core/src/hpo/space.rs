use serde::{Deserialize, Serialize};

use super::HpoError;
use crate::mlp::MlpArchitecture;

pub const DIMENSIONS: usize = 6;

/// A point of the hyperparameter grid as per-dimension list indices
/// `[batch, epochs, layers, nodes, dropout, lag]`. Ordering is lexicographic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridPoint(pub [usize; DIMENSIONS]);

/// Six sorted, duplicate-free value lists. Each dimension is searched through
/// its index `0..len`, which is scaled to `[0, 1]` for surrogate geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceRepr", into = "SpaceRepr")]
pub struct HyperparameterSpace {
    dims: [Vec<f64>; DIMENSIONS],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceRepr {
    pub batch_size: Vec<usize>,
    pub epochs: Vec<usize>,
    pub layers: Vec<usize>,
    pub nodes_per_layer: Vec<usize>,
    pub dropout_rate: Vec<f64>,
    pub lag: Vec<usize>,
}

fn to_f64(v: &[usize]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

impl TryFrom<SpaceRepr> for HyperparameterSpace {
    type Error = HpoError;

    fn try_from(r: SpaceRepr) -> Result<Self, HpoError> {
        Self::new(
            to_f64(&r.batch_size),
            to_f64(&r.epochs),
            to_f64(&r.layers),
            to_f64(&r.nodes_per_layer),
            r.dropout_rate,
            to_f64(&r.lag),
        )
    }
}

impl From<HyperparameterSpace> for SpaceRepr {
    fn from(s: HyperparameterSpace) -> Self {
        let ints = |d: usize| s.dims[d].iter().map(|&x| x as usize).collect();
        SpaceRepr {
            batch_size: ints(0),
            epochs: ints(1),
            layers: ints(2),
            nodes_per_layer: ints(3),
            dropout_rate: s.dims[4].clone(),
            lag: ints(5),
        }
    }
}

const NAMES: [&str; DIMENSIONS] = [
    "batch_size",
    "epochs",
    "layers",
    "nodes_per_layer",
    "dropout_rate",
    "lag",
];

impl HyperparameterSpace {
    pub fn new(
        batch_size: Vec<f64>,
        epochs: Vec<f64>,
        layers: Vec<f64>,
        nodes_per_layer: Vec<f64>,
        dropout_rate: Vec<f64>,
        lag: Vec<f64>,
    ) -> Result<Self, HpoError> {
        let dims = [
            batch_size,
            epochs,
            layers,
            nodes_per_layer,
            dropout_rate,
            lag,
        ];
        for (d, values) in dims.iter().enumerate() {
            let name = NAMES[d];
            if values.is_empty() {
                return Err(HpoError::Config(format!("{name}: empty value list")));
            }
            if values.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(HpoError::Config(format!(
                    "{name}: values must be strictly ascending"
                )));
            }
            let ok = if d == 4 {
                values.iter().all(|&p| (0.0..1.0).contains(&p))
            } else {
                values.iter().all(|&v| v >= 1.0 && v.fract() == 0.0)
            };
            if !ok {
                return Err(HpoError::Config(format!("{name}: value out of range")));
            }
        }
        Ok(Self { dims })
    }

    /// The grid searched for the groundwater, soil-moisture and flux cases:
    /// batch 10..=200 step 5, epochs 50..=500 step 50, layers 1..=6,
    /// nodes 5..=50 step 5, dropout 0.0..=0.5 step 0.1, lag 30..=365 step 5.
    pub fn default_grid() -> Self {
        let range = |lo: usize, hi: usize, step: usize| {
            (lo..=hi)
                .step_by(step)
                .map(|v| v as f64)
                .collect::<Vec<_>>()
        };
        Self::new(
            range(10, 200, 5),
            range(50, 500, 50),
            range(1, 6, 1),
            range(5, 50, 5),
            (0..=5).map(|i| f64::from(i) / 10.0).collect(),
            range(30, 365, 5),
        )
        .expect("built-in space is valid")
    }

    pub fn values(&self, dim: usize) -> &[f64] {
        &self.dims[dim]
    }

    pub fn sizes(&self) -> [usize; DIMENSIONS] {
        std::array::from_fn(|d| self.dims[d].len())
    }

    /// Number of grid points.
    pub fn size(&self) -> u128 {
        self.sizes().iter().map(|&m| m as u128).product()
    }

    pub fn contains(&self, p: &GridPoint) -> bool {
        p.0.iter().zip(self.sizes()).all(|(&i, m)| i < m)
    }

    /// Coordinates `index / (len - 1)`; single-value dimensions map to 0.
    pub fn scaled(&self, p: &GridPoint) -> Vec<f64> {
        p.0.iter()
            .zip(self.sizes())
            .map(|(&i, m)| {
                if m > 1 {
                    i as f64 / (m - 1) as f64
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn decode(&self, p: &GridPoint) -> MlpArchitecture {
        let v = |d: usize| self.dims[d][p.0[d]];
        MlpArchitecture {
            batch_size: v(0) as usize,
            epochs: v(1) as usize,
            layers: v(2) as usize,
            nodes_per_layer: v(3) as usize,
            dropout_rate: v(4),
            lag: v(5) as usize,
        }
    }

    pub fn encode(&self, arch: &MlpArchitecture) -> Option<GridPoint> {
        let wanted = [
            arch.batch_size as f64,
            arch.epochs as f64,
            arch.layers as f64,
            arch.nodes_per_layer as f64,
            arch.dropout_rate,
            arch.lag as f64,
        ];
        let mut idx = [0; DIMENSIONS];
        for d in 0..DIMENSIONS {
            idx[d] = self.dims[d]
                .iter()
                .position(|&v| (v - wanted[d]).abs() < 1e-9)?;
        }
        Some(GridPoint(idx))
    }

    /// Point at lexicographic rank `rank` (row-major over the index grid).
    pub fn nth(&self, mut rank: u128) -> GridPoint {
        let sizes = self.sizes();
        let mut idx = [0; DIMENSIONS];
        for d in (0..DIMENSIONS).rev() {
            idx[d] = (rank % sizes[d] as u128) as usize;
            rank /= sizes[d] as u128;
        }
        GridPoint(idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_grid_lists() {
        let s = HyperparameterSpace::default_grid();
        assert_eq!(s.sizes(), [39, 10, 6, 10, 6, 68]);
        assert_eq!(s.size(), 9_547_200);
        assert_eq!(s.values(0).first(), Some(&10.0));
        assert_eq!(s.values(0).last(), Some(&200.0));
        assert_eq!(s.values(5).last(), Some(&365.0));
        assert_eq!(s.values(4), &[0.0, 0.1, 0.2, 0.3, 0.4, 0.5]);
    }

    #[test]
    fn rejects_unsorted_lists() {
        let err = HyperparameterSpace::new(
            vec![20.0, 10.0],
            vec![50.0],
            vec![1.0],
            vec![5.0],
            vec![0.0],
            vec![30.0],
        );
        assert!(err.is_err());
    }

    #[test]
    fn nth_is_lexicographic() {
        let s = HyperparameterSpace::new(
            vec![1.0, 2.0],
            vec![1.0, 2.0, 3.0],
            vec![1.0],
            vec![1.0],
            vec![0.0],
            vec![1.0, 2.0],
        )
        .unwrap();
        let all: Vec<_> = (0..s.size()).map(|r| s.nth(r)).collect();
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(all, sorted);
        assert_eq!(all.len(), 12);
    }

    proptest! {
        #[test]
        fn encode_decode_bijection(i in proptest::array::uniform6(0usize..100)) {
            let s = HyperparameterSpace::default_grid();
            let sizes = s.sizes();
            let p = GridPoint(std::array::from_fn(|d| i[d] % sizes[d]));
            let arch = s.decode(&p);
            prop_assert_eq!(s.encode(&arch), Some(p));
            prop_assert!(s.scaled(&p).iter().all(|c| (0.0..=1.0).contains(c)));
        }
    }
}
