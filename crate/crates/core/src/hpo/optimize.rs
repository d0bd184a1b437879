use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use super::design::latin_hypercube;
use super::propose::{propose_next, random_unevaluated, Proposal, SurrogateState};
use super::space::{GridPoint, HyperparameterSpace};
use super::{HpoConfig, HpoError};
use crate::derive_seed;
use crate::mlp::{train, MlpArchitecture};
use crate::series::{build_lagged_table, reduce_lagged_table, split_train_val, MultivariateSeries};

const DESIGN_TAG: u64 = 0xd351;
const PROPOSAL_TAG: u64 = 0x9e0f;
const TRIAL_TAG: u64 = 0x7a1a;

/// Outcome of scoring one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Per-trial validation MSE; `+inf` marks a failed trial.
    pub trial_mses: Vec<f64>,
    /// Mean of `trial_mses`, `+inf` if any trial failed.
    pub performance: f64,
    pub failure: Option<String>,
}

impl Evaluation {
    pub fn from_trials(trial_mses: Vec<f64>, failure: Option<String>) -> Self {
        let performance = if trial_mses.is_empty() || trial_mses.iter().any(|v| !v.is_finite()) {
            f64::INFINITY
        } else {
            trial_mses.iter().sum::<f64>() / trial_mses.len() as f64
        };
        Self {
            trial_mses,
            performance,
            failure,
        }
    }

    pub fn single(value: f64) -> Self {
        Self::from_trials(vec![value], None)
    }

    pub fn failed(reason: impl Into<String>) -> Self {
        Self {
            trial_mses: Vec::new(),
            performance: f64::INFINITY,
            failure: Some(reason.into()),
        }
    }
}

/// Something that scores architectures. `index` is the 0-based evaluation
/// number, used to derive per-trial seeds.
pub trait Objective: Sync {
    fn evaluate(&self, arch: &MlpArchitecture, index: usize) -> Evaluation;
}

impl<F> Objective for F
where
    F: Fn(&MlpArchitecture, usize) -> Evaluation + Sync,
{
    fn evaluate(&self, arch: &MlpArchitecture, index: usize) -> Evaluation {
        self(arch, index)
    }
}

/// Builds the lagged table at `arch.lag`, reduces and splits it, and trains
/// `config.k` models with seeds derived from `(config.seed, index, trial)`.
/// Returns the mean validation MSE; failures become `+inf`.
pub fn evaluate_point(
    arch: &MlpArchitecture,
    series: &MultivariateSeries,
    config: &HpoConfig,
    index: usize,
) -> Evaluation {
    let split = build_lagged_table(series, arch.lag)
        .map(|t| reduce_lagged_table(&t))
        .and_then(|t| split_train_val(&t, config.train_fraction));
    let (tr, va) = match split {
        Ok(s) => s,
        Err(e) => return Evaluation::failed(e.to_string()),
    };
    let results: Vec<Result<f64, String>> = (0..config.k)
        .into_par_iter()
        .map(|trial| {
            let seed = derive_seed(config.seed, &[TRIAL_TAG, index as u64, trial as u64]);
            train(&tr, &va, arch, &config.train.with_seed(seed))
                .map(|t| t.val_mse)
                .map_err(|e| format!("trial {}: {e}", trial + 1))
        })
        .collect();
    let failure = results.iter().find_map(|r| r.as_ref().err().cloned());
    let mses = results
        .into_iter()
        .map(|r| r.unwrap_or(f64::INFINITY))
        .collect();
    Evaluation::from_trials(mses, failure)
}

/// Trains MLPs on a normalized series.
pub struct SeriesObjective<'a> {
    pub series: &'a MultivariateSeries,
    pub config: &'a HpoConfig,
}

impl Objective for SeriesObjective<'_> {
    fn evaluate(&self, arch: &MlpArchitecture, index: usize) -> Evaluation {
        evaluate_point(arch, self.series, self.config, index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    /// 1-based evaluation number.
    pub iteration: usize,
    pub point: GridPoint,
    pub architecture: MlpArchitecture,
    pub evaluation: Evaluation,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HpoResult {
    pub best_point: GridPoint,
    pub best: MlpArchitecture,
    pub best_performance: f64,
    pub history: Vec<HistoryEntry>,
    /// True when the grid ran out before the budget.
    pub exhausted: bool,
}

impl HpoResult {
    /// Best-so-far performance after each evaluation.
    pub fn incumbent_trace(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.history
            .iter()
            .map(|h| {
                best = best.min(h.evaluation.performance);
                best
            })
            .collect()
    }
}

fn record(
    history: &mut Vec<HistoryEntry>,
    space: &HyperparameterSpace,
    objective: &dyn Objective,
    point: GridPoint,
) {
    let architecture = space.decode(&point);
    let index = history.len();
    let started = Instant::now();
    let evaluation = objective.evaluate(&architecture, index);
    let seconds = started.elapsed().as_secs_f64();
    if let Some(reason) = &evaluation.failure {
        log::warn!("evaluation {} failed: {reason}", index + 1);
    }
    log::info!(
        "evaluation {}/{:?}: performance {}",
        index + 1,
        point.0,
        evaluation.performance
    );
    history.push(HistoryEntry {
        iteration: index + 1,
        point,
        architecture,
        evaluation,
        seconds,
    });
}

/// Runs the design phase and the adaptive loop against any objective.
pub fn optimize_with(
    objective: &dyn Objective,
    space: &HyperparameterSpace,
    config: &HpoConfig,
) -> Result<HpoResult, HpoError> {
    config.validate()?;
    let mut history = Vec::with_capacity(config.n);
    let n0 = config
        .n0
        .min(usize::try_from(space.size()).unwrap_or(usize::MAX));
    for p in latin_hypercube(space, n0, derive_seed(config.seed, &[DESIGN_TAG]))? {
        record(&mut history, space, objective, p);
    }
    let mut exhausted = false;
    let mut adaptive = 0;
    while history.len() < config.n {
        let points: Vec<GridPoint> = history.iter().map(|h| h.point).collect();
        let perf: Vec<f64> = history.iter().map(|h| h.evaluation.performance).collect();
        let seed = derive_seed(config.seed, &[PROPOSAL_TAG, adaptive as u64]);
        let proposal = match SurrogateState::fit(space, &points, &perf, config.surrogate, adaptive)
        {
            Ok(state) => propose_next(&state, space, adaptive, seed),
            Err(e) => {
                log::warn!("surrogate fit failed ({e}); sampling uniformly");
                random_unevaluated(space, &points, seed)
            }
        };
        match proposal {
            Proposal::Point(p) => record(&mut history, space, objective, p),
            Proposal::Exhausted => {
                exhausted = true;
                break;
            }
        }
        adaptive += 1;
    }
    debug_assert_eq!(
        history
            .iter()
            .map(|h| h.point)
            .collect::<BTreeSet<_>>()
            .len(),
        history.len()
    );
    let best_entry = history
        .iter()
        .filter(|h| h.evaluation.performance.is_finite())
        .min_by(|a, b| {
            a.evaluation
                .performance
                .total_cmp(&b.evaluation.performance)
                .then(a.iteration.cmp(&b.iteration))
        })
        .ok_or_else(|| HpoError::Config("every evaluated point failed".into()))?;
    Ok(HpoResult {
        best_point: best_entry.point,
        best: best_entry.architecture,
        best_performance: best_entry.evaluation.performance,
        exhausted,
        history,
    })
}

/// Searches MLP architectures on a normalized series.
pub fn optimize(
    series: &MultivariateSeries,
    space: &HyperparameterSpace,
    config: &HpoConfig,
) -> Result<HpoResult, HpoError> {
    optimize_with(&SeriesObjective { series, config }, space, config)
}

fn fmt_value(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        "inf".into()
    }
}

/// History columns: iteration, the six hyperparameters, `trial_1..trial_k`,
/// `mean_mse`, `seconds`.
pub fn write_history_csv<W: Write>(
    writer: W,
    result: &HpoResult,
    k: usize,
) -> Result<(), HpoError> {
    let io = |e: csv::Error| HpoError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = [
        "iteration",
        "batch_size",
        "epochs",
        "layers",
        "nodes_per_layer",
        "dropout_rate",
        "lag",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=k).map(|t| format!("trial_{t}")));
    header.extend(["mean_mse".to_string(), "seconds".to_string()]);
    w.write_record(&header).map_err(io)?;
    for h in &result.history {
        let a = &h.architecture;
        let mut row = vec![
            h.iteration.to_string(),
            a.batch_size.to_string(),
            a.epochs.to_string(),
            a.layers.to_string(),
            a.nodes_per_layer.to_string(),
            a.dropout_rate.to_string(),
            a.lag.to_string(),
        ];
        for t in 0..k {
            row.push(
                h.evaluation
                    .trial_mses
                    .get(t)
                    .map_or(String::new(), |&v| fmt_value(v)),
            );
        }
        row.push(fmt_value(h.evaluation.performance));
        row.push(format!("{:.3}", h.seconds));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| HpoError::Io(e.to_string()))
}
