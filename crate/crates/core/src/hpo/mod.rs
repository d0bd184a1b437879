//! Surrogate-model search over the discrete architecture grid.

mod design;
mod optimize;
mod propose;
mod space;
mod surrogate;

pub use design::latin_hypercube;
pub use optimize::{
    evaluate_point, optimize, optimize_with, write_history_csv, Evaluation, HistoryEntry,
    HpoResult, Objective, SeriesObjective,
};
pub use propose::{
    clamp_failures, generate_candidates, propose_next, random_unevaluated, score_candidates,
    weight_for_iteration, Proposal, ScoredCandidate, SurrogateState, PERTURBATION_CANDIDATES,
    UNIFORM_CANDIDATES, WEIGHT_CYCLE,
};
pub use space::{GridPoint, HyperparameterSpace, SpaceRepr, DIMENSIONS};
pub use surrogate::{fit_gp, fit_rbf, GpModel, RbfModel, Surrogate, SurrogateKind, GP_NUGGET};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mlp::TrainConfig;
use crate::series::DEFAULT_TRAIN_FRACTION;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HpoError {
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("initial design: {0}")]
    Design(String),
    #[error("surrogate: {0}")]
    Surrogate(String),
    #[error("surrogate needs at least {need} distinct points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("interpolation system is singular")]
    Singular,
    #[error("covariance factorization failed at the largest nugget")]
    Cholesky,
    #[error("history output: {0}")]
    Io(String),
}

/// Budget and seeding of one search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HpoConfig {
    /// Size of the initial Latin-hypercube design.
    pub n0: usize,
    /// Total number of evaluated points, design included.
    pub n: usize,
    /// Training repetitions averaged per point.
    pub k: usize,
    pub surrogate: SurrogateKind,
    pub seed: u64,
    pub train_fraction: f64,
    pub train: TrainConfig,
}

impl Default for HpoConfig {
    fn default() -> Self {
        Self {
            n0: 10,
            n: 50,
            k: 5,
            surrogate: SurrogateKind::Rbf,
            seed: 0,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            train: TrainConfig::default(),
        }
    }
}

impl HpoConfig {
    pub fn validate(&self) -> Result<(), HpoError> {
        let need = DIMENSIONS + 2;
        if self.n0 < need {
            return Err(HpoError::Config(format!(
                "n0 = {} but the {} surrogate needs at least {need} initial points",
                self.n0, self.surrogate
            )));
        }
        if self.n <= self.n0 {
            return Err(HpoError::Config(format!(
                "budget n = {} must exceed n0 = {}",
                self.n, self.n0
            )));
        }
        if self.k == 0 {
            return Err(HpoError::Config("k must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(HpoError::Config(format!(
                "train_fraction {} outside (0, 1)",
                self.train_fraction
            )));
        }
        self.train
            .validate()
            .map_err(|e| HpoError::Config(e.to_string()))
    }
}
