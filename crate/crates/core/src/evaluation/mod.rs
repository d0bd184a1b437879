//! Artificial-gap experiments: hide a window of known target values, fill it
//! with every method, and score the fills against the hidden truth.

mod plot;
mod report;

pub use plot::{line_chart_svg, scatter_svg, Line};
pub use report::{emit_report, results_csv, RESULTS_HEADER};

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use chrono::{NaiveDate, NaiveDateTime};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{interpolate_linear, interpolate_spline, locf, seasonal_interpolate, Fill};
use crate::derive_seed;
use crate::hpo::{optimize, HpoConfig, HyperparameterSpace, SurrogateKind};
use crate::imputer::{finalize_model, impute, prepare_series};
use crate::mlp::MlpArchitecture;
use crate::series::{apply_scaler, fit_scaler, GapSpec, MultivariateSeries, SeriesError};

const FINAL_TAG: u64 = 0xf17a;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("window {from} to {to}: {reason}")]
    Window {
        from: NaiveDate,
        to: NaiveDate,
        reason: String,
    },
    #[error("rmse needs equal non-empty inputs, got {0} and {1}")]
    Length(usize, usize),
    #[error("{0}")]
    Io(String),
}

/// Root mean squared difference.
pub fn rmse(predictions: &[f64], truth: &[f64]) -> Result<f64, EvalError> {
    if predictions.len() != truth.len() || truth.is_empty() {
        return Err(EvalError::Length(predictions.len(), truth.len()));
    }
    let sum: f64 = predictions
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok((sum / truth.len() as f64).sqrt())
}

/// Inclusive calendar-date window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub from: NaiveDate,
    pub to: NaiveDate,
}

impl Window {
    pub fn new(from: NaiveDate, to: NaiveDate) -> Self {
        Self { from, to }
    }

    /// `<from>_<to>` with ISO dates, used in file names.
    pub fn label(&self) -> String {
        format!("{}_{}", self.from, self.to)
    }
}

/// Target values removed from a series, kept apart from anything a method sees.
#[derive(Debug, Clone, PartialEq)]
pub struct HeldOut {
    pub gap: GapSpec,
    pub timestamps: Vec<NaiveDateTime>,
    pub truth: Vec<f64>,
}

/// Blanks the target over every row whose date lies in `[from, to]`.
pub fn make_artificial_gap(
    series: &MultivariateSeries,
    window: Window,
) -> Result<(MultivariateSeries, HeldOut), EvalError> {
    let err = |reason: String| EvalError::Window {
        from: window.from,
        to: window.to,
        reason,
    };
    if window.from > window.to {
        return Err(err("start date after end date".into()));
    }
    let ts = series.timestamps();
    let (first, last) = (ts[0].date(), ts[ts.len() - 1].date());
    if window.from < first || window.to > last {
        return Err(err(format!("outside the series range {first} to {last}")));
    }
    let rows: Vec<usize> = (0..series.len())
        .filter(|&r| (window.from..=window.to).contains(&ts[r].date()))
        .collect();
    let (Some(&start), Some(&end)) = (rows.first(), rows.last()) else {
        return Err(err("no rows fall inside the window".into()));
    };
    let mut target = series.target();
    let mut truth = Vec::with_capacity(rows.len());
    for r in start..=end {
        match target[r].take() {
            Some(v) => truth.push(v),
            None => return Err(err(format!("target already missing at row {r}"))),
        }
    }
    let gapped = series.with_target(&target)?;
    if gapped.gap()?.map(|g| (g.start_index, g.end_index)) != Some((start, end)) {
        return Err(err("series already has missing target values".into()));
    }
    let gap = gapped.gap()?.expect("gap just created");
    Ok((
        gapped,
        HeldOut {
            gap,
            timestamps: ts[start..=end].to_vec(),
            truth,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    MlpRbf,
    MlpGp,
    Linear,
    Locf,
    Spline,
    Seasonal,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::MlpRbf,
        Method::MlpGp,
        Method::Linear,
        Method::Locf,
        Method::Spline,
        Method::Seasonal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::MlpRbf => "mlp-rbf",
            Self::MlpGp => "mlp-gp",
            Self::Linear => "linear",
            Self::Locf => "locf",
            Self::Spline => "spline",
            Self::Seasonal => "seasonal",
        }
    }

    fn id(self) -> u64 {
        self as u64
    }

    pub fn surrogate(self) -> Option<SurrogateKind> {
        match self {
            Self::MlpRbf => Some(SurrogateKind::Rbf),
            Self::MlpGp => Some(SurrogateKind::Gp),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    /// Fully observed (over every window) series in original units.
    pub series: MultivariateSeries,
    pub windows: Vec<Window>,
    pub methods: Vec<Method>,
    pub hpo: HpoConfig,
    pub space: HyperparameterSpace,
    /// Ensemble size of the final imputation model.
    pub ensemble_size: usize,
    /// Steps per season for the seasonal baseline.
    pub frequency: usize,
    pub temporal_features: bool,
    pub seed: u64,
    /// Write wall-clock seconds into `results.csv` (breaks byte-identical replays).
    pub record_timing: bool,
}

/// Outcome of one (window, method) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub window: usize,
    pub method: Method,
    /// Filled values over the gap, original units; empty on failure.
    pub fill: Vec<f64>,
    pub rmse: Option<f64>,
    /// Per-step absolute errors against the held-out truth.
    pub abs_errors: Vec<f64>,
    pub architecture: Option<MlpArchitecture>,
    /// Mean validation MSE of the chosen architecture (MLP methods).
    pub best_performance: Option<f64>,
    pub seconds: f64,
    pub failure: Option<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowReport {
    pub window: Window,
    pub held_out: HeldOut,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputationReport {
    pub windows: Vec<WindowReport>,
    /// Window-major, methods in plan order.
    pub cells: Vec<CellResult>,
    pub record_timing: bool,
}

impl ImputationReport {
    pub fn cell(&self, window: usize, method: Method) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.window == window && c.method == method)
    }

    pub fn failures(&self) -> Vec<&CellResult> {
        self.cells.iter().filter(|c| c.failure.is_some()).collect()
    }
}

struct MethodOutput {
    fill: Vec<f64>,
    architecture: Option<MlpArchitecture>,
    best_performance: Option<f64>,
    warnings: Vec<String>,
}

fn gap_values(fill: Fill, gap: &GapSpec) -> MethodOutput {
    MethodOutput {
        fill: fill.values[gap.start_index..=gap.end_index].to_vec(),
        architecture: None,
        best_performance: None,
        warnings: fill.warnings,
    }
}

fn run_mlp(
    plan: &ExperimentPlan,
    gapped: &MultivariateSeries,
    kind: SurrogateKind,
    seed: u64,
) -> Result<MethodOutput, String> {
    let full = prepare_series(gapped, plan.temporal_features).map_err(|e| e.to_string())?;
    let scaler = fit_scaler(&full).map_err(|e| e.to_string())?;
    let scaled = apply_scaler(&full, &scaler).map_err(|e| e.to_string())?;
    let config = HpoConfig {
        surrogate: kind,
        seed,
        ..plan.hpo.clone()
    };
    let search = optimize(&scaled, &plan.space, &config).map_err(|e| e.to_string())?;
    let train = config.train.with_seed(derive_seed(seed, &[FINAL_TAG]));
    let model = finalize_model(&full, &search.best, plan.ensemble_size, &train)
        .map_err(|e| e.to_string())?;
    let imputation = impute(gapped, &model).map_err(|e| e.to_string())?;
    let mut warnings: Vec<String> = scaler.warnings.clone();
    if !imputation.out_of_range.is_empty() {
        warnings.push(format!(
            "{} prediction(s) outside the observed target range",
            imputation.out_of_range.len()
        ));
    }
    Ok(MethodOutput {
        fill: imputation.fill(),
        architecture: Some(search.best),
        best_performance: Some(search.best_performance),
        warnings,
    })
}

fn run_method(
    plan: &ExperimentPlan,
    gapped: &MultivariateSeries,
    gap: &GapSpec,
    method: Method,
    seed: u64,
) -> Result<MethodOutput, String> {
    let column = gapped.target();
    let baseline = |r: Result<Fill, crate::baselines::BaselineError>| {
        r.map(|f| gap_values(f, gap)).map_err(|e| e.to_string())
    };
    match method {
        Method::Linear => baseline(interpolate_linear(&column)),
        Method::Locf => baseline(locf(&column)),
        Method::Spline => baseline(interpolate_spline(&column)),
        Method::Seasonal => baseline(seasonal_interpolate(&column, plan.frequency)),
        Method::MlpRbf | Method::MlpGp => {
            run_mlp(plan, gapped, method.surrogate().expect("mlp method"), seed)
        }
    }
}

/// Runs every (window, method) cell. A failing cell is recorded in the
/// report; only unusable windows abort the run.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ImputationReport, EvalError> {
    let mut windows = Vec::with_capacity(plan.windows.len());
    let mut gapped = Vec::with_capacity(plan.windows.len());
    for &w in &plan.windows {
        let (series, held_out) = make_artificial_gap(&plan.series, w)?;
        gapped.push(series);
        windows.push(WindowReport {
            window: w,
            held_out,
        });
    }
    let jobs: Vec<(usize, Method)> = (0..windows.len())
        .flat_map(|w| plan.methods.iter().map(move |&m| (w, m)))
        .collect();
    let cells = jobs
        .into_par_iter()
        .map(|(w, method)| {
            let held = &windows[w].held_out;
            let seed = derive_seed(plan.seed, &[w as u64, method.id()]);
            let started = Instant::now();
            let outcome = run_method(plan, &gapped[w], &held.gap, method, seed);
            let seconds = started.elapsed().as_secs_f64();
            match outcome {
                Ok(out) => {
                    let abs_errors = out
                        .fill
                        .iter()
                        .zip(&held.truth)
                        .map(|(p, t)| (p - t).abs())
                        .collect();
                    let score = rmse(&out.fill, &held.truth);
                    let failure = score.as_ref().err().map(|e| e.to_string());
                    log::info!(
                        "window {} {method}: rmse {:?}",
                        windows[w].window.label(),
                        score
                    );
                    CellResult {
                        window: w,
                        method,
                        fill: out.fill,
                        rmse: score.ok(),
                        abs_errors,
                        architecture: out.architecture,
                        best_performance: out.best_performance,
                        seconds,
                        failure,
                        warnings: out.warnings,
                    }
                }
                Err(reason) => {
                    log::warn!(
                        "window {} {method} failed: {reason}",
                        windows[w].window.label()
                    );
                    CellResult {
                        window: w,
                        method,
                        fill: Vec::new(),
                        rmse: None,
                        abs_errors: Vec::new(),
                        architecture: None,
                        best_performance: None,
                        seconds,
                        failure: Some(reason),
                        warnings: Vec::new(),
                    }
                }
            }
        })
        .collect();
    Ok(ImputationReport {
        windows,
        cells,
        record_timing: plan.record_timing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::tests::daily;

    fn daily_series(start: (i32, u32, u32), rows: usize) -> MultivariateSeries {
        let values = (0..rows)
            .flat_map(|i| {
                let t = i as f64;
                [Some((t / 58.0).sin() + 0.01 * t), Some((t / 30.0).cos())]
            })
            .collect();
        MultivariateSeries::new(daily(start, rows), vec!["y".into(), "x".into()], values, 0)
            .unwrap()
    }

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn gap_counts_follow_the_calendar() {
        let s = daily_series((2011, 1, 1), 1200);
        let (_, h) = make_artificial_gap(&s, Window::new(d(2012, 1, 1), d(2012, 3, 31))).unwrap();
        assert_eq!(h.truth.len(), 91);
        let (_, h) = make_artificial_gap(&s, Window::new(d(2012, 2, 1), d(2013, 1, 31))).unwrap();
        assert_eq!(h.truth.len(), 366);
        assert!(make_artificial_gap(&s, Window::new(d(2012, 3, 1), d(2012, 2, 1))).is_err());
        assert!(make_artificial_gap(&s, Window::new(d(2010, 3, 1), d(2011, 2, 1))).is_err());
    }

    #[test]
    fn gap_keeps_truth_and_supports() {
        let s = daily_series((2012, 1, 1), 100);
        let (g, h) = make_artificial_gap(&s, Window::new(d(2012, 1, 11), d(2012, 1, 20))).unwrap();
        assert_eq!((h.gap.start_index, h.gap.end_index), (10, 19));
        assert_eq!(
            h.truth,
            (10..20).map(|r| s.value(r, 0).unwrap()).collect::<Vec<_>>()
        );
        assert_eq!(g.column(1), s.column(1));
        assert!((10..20).all(|r| g.value(r, 0).is_none()));
        // Overlapping an existing gap is rejected.
        assert!(make_artificial_gap(&g, Window::new(d(2012, 1, 15), d(2012, 1, 25))).is_err());
    }

    #[test]
    fn rmse_cases() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rmse_matches_two_pass_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p: Vec<f64> = (0..365).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let t: Vec<f64> = (0..365).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let diffs: Vec<f64> = p.iter().zip(&t).map(|(a, b)| a - b).collect();
        let mut acc = 0.0;
        for x in &diffs {
            acc += x * x;
        }
        let oracle = (acc / 365.0).sqrt();
        assert!((rmse(&p, &t).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            let j = serde_json::to_string(&m).unwrap();
            assert_eq!(j, format!("\"{}\"", m.name()));
        }
    }

    fn baseline_plan(methods: Vec<Method>) -> ExperimentPlan {
        ExperimentPlan {
            series: daily_series((2012, 1, 1), 800),
            windows: vec![
                Window::new(d(2012, 3, 1), d(2012, 5, 31)),
                Window::new(d(2013, 1, 1), d(2013, 1, 31)),
            ],
            methods,
            hpo: HpoConfig::default(),
            space: HyperparameterSpace::default_grid(),
            ensemble_size: 1,
            frequency: 365,
            temporal_features: true,
            seed: 1,
            record_timing: false,
        }
    }

    #[test]
    fn minimal_plan_has_one_cell() {
        let mut plan = baseline_plan(vec![Method::Linear]);
        plan.windows.truncate(1);
        let r = run_experiment(&plan).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert!(r.cells[0].rmse.is_some());
    }

    #[test]
    fn report_rmse_is_consistent_and_truth_isolated() {
        let plan = baseline_plan(vec![
            Method::Linear,
            Method::Locf,
            Method::Spline,
            Method::Seasonal,
        ]);
        let r = run_experiment(&plan).unwrap();
        assert_eq!(r.cells.len(), 8);
        for c in &r.cells {
            let truth = &r.windows[c.window].held_out.truth;
            assert_eq!(c.fill.len(), truth.len());
            assert_eq!(c.abs_errors.len(), truth.len());
            assert_eq!(c.rmse.unwrap(), rmse(&c.fill, truth).unwrap());
            assert!(c.rmse.unwrap() >= 0.0);
        }
        // Methods only see the gapped series: changing the truth inside the
        // first window leaves that window's fills unchanged.
        let mut y = plan.series.target();
        for v in &mut y[60..152] {
            *v = Some(1e6);
        }
        let mut other = plan.clone();
        other.series = plan.series.with_target(&y).unwrap();
        let r2 = run_experiment(&other).unwrap();
        for (a, b) in r.cells.iter().zip(&r2.cells).filter(|(a, _)| a.window == 0) {
            assert_eq!(a.fill, b.fill);
        }
    }

    #[test]
    fn failing_cell_is_recorded() {
        let mut plan = baseline_plan(vec![Method::Seasonal, Method::Linear]);
        plan.frequency = 10_000;
        let r = run_experiment(&plan).unwrap();
        assert_eq!(r.failures().len(), 2);
        assert!(r.cell(0, Method::Linear).unwrap().rmse.is_some());
    }
}
