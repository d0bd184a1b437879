//! Command-line front end: `validate`, `hpo`, `impute`, `evaluate`.

mod config;

pub use config::{search_issues, ConfigIssue, RunConfig, SearchSection, TrainSection};

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::TimeDelta;
use clap::{Parser, Subcommand};
use serde_json::json;

use crate::evaluation::{emit_report, run_experiment, ExperimentPlan};
use crate::hpo::{optimize, write_history_csv, SurrogateKind};
use crate::imputer::{finalize_model, impute, prepare_series, ImputationModel, ImputeError};
use crate::series::{
    apply_scaler, fit_scaler, read_series_csv, write_imputed_csv, MultivariateSeries,
};

pub const SEED_ENV: &str = "GAPFILL_SEED";

/// Exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Usage = 1,
    Data = 2,
    Runtime = 3,
}

#[derive(Debug)]
pub enum CliError {
    Config(Vec<ConfigIssue>),
    Usage(String),
    Data(String),
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> ExitCode {
        match self {
            Self::Config(_) | Self::Usage(_) => ExitCode::Usage,
            Self::Data(_) => ExitCode::Data,
            Self::Runtime(_) => ExitCode::Runtime,
        }
    }

    fn report(&self) {
        match self {
            Self::Config(issues) => {
                for i in issues {
                    eprintln!(
                        "{}",
                        json!({"error": "config", "path": i.path, "message": i.message})
                    );
                }
            }
            Self::Usage(m) => eprintln!("error: {m}"),
            Self::Data(m) => eprintln!("data error: {m}"),
            Self::Runtime(m) => eprintln!("runtime error: {m}"),
        }
    }
}

fn config_issue(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config(vec![ConfigIssue {
        path: path.into(),
        message: message.into(),
    }])
}

#[derive(Debug, Parser)]
#[command(
    name = "gapfill",
    version,
    about = "Fill one long gap in a multivariate time series with a surrogate-tuned MLP",
    after_help = "Flags override values from the --config file. Seed precedence: \
                  --seed, then the config `seed`, then the GAPFILL_SEED environment \
                  variable, then 0.\n\nExit codes: 0 success, 1 usage or config error, \
                  2 data error, 3 runtime failure."
)]
pub struct Cli {
    /// Maximum number of concurrent trainings (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a CSV file and summarize it.
    Validate {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value = "time")]
        time: String,
        #[arg(long)]
        target: String,
    },
    /// Search architectures; writes history.csv, best.json and model.json.
    Hpo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        surrogate: Option<SurrogateArg>,
        /// Total number of evaluated architectures.
        #[arg(long)]
        budget: Option<usize>,
        /// Size of the initial design.
        #[arg(long)]
        init: Option<usize>,
        /// Trainings averaged per architecture.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: the config `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fill the gap with a saved model and write the completed CSV.
    Impute {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the artificial-gap experiment described by the config.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum SurrogateArg {
    Rbf,
    Gp,
}

impl From<SurrogateArg> for SurrogateKind {
    fn from(s: SurrogateArg) -> Self {
        match s {
            SurrogateArg::Rbf => SurrogateKind::Rbf,
            SurrogateArg::Gp => SurrogateKind::Gp,
        }
    }
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::Usage as i32
            } else {
                ExitCode::Success as i32
            };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::Usage as i32;
        }
        pool = pool.num_threads(j);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("runtime error: {e}");
            return ExitCode::Runtime as i32;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(()) => ExitCode::Success as i32,
        Err(e) => {
            e.report();
            e.code() as i32
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate { csv, time, target } => cmd_validate(&csv, &time, &target),
        Command::Hpo {
            config,
            surrogate,
            budget,
            init,
            trials,
            seed,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = surrogate {
                cfg.search.surrogate = s.into();
            }
            if let Some(n) = budget {
                cfg.search.n = n;
            }
            if let Some(n0) = init {
                cfg.search.n0 = n0;
            }
            if let Some(k) = trials {
                cfg.search.k = k;
            }
            let issues = cfg.issues();
            if !issues.is_empty() {
                return Err(CliError::Config(issues));
            }
            let seed = resolve_seed(seed, cfg.seed)?;
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            cmd_hpo(&cfg, seed, &out)
        }
        Command::Impute { config, model, out } => cmd_impute(&load_config(&config)?, &model, &out),
        Command::Evaluate { config, seed, out } => {
            let cfg = load_config(&config)?;
            let seed = resolve_seed(seed, cfg.seed)?;
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            cmd_evaluate(&cfg, seed, &out)
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    RunConfig::load(path).map_err(CliError::Config)
}

/// `--seed`, then the config value, then `GAPFILL_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| config_issue(SEED_ENV, format!("`{v}` is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn format_step(step: TimeDelta) -> String {
    let secs = step.num_seconds();
    if secs % 86_400 == 0 {
        format!("{}d", secs / 86_400)
    } else if secs % 3_600 == 0 {
        format!("{}h", secs / 3_600)
    } else if secs % 60 == 0 {
        format!("{}min", secs / 60)
    } else {
        format!("{secs}s")
    }
}

/// One-line summary such as `S=2922, N=4, step=1d, gaps: none`.
pub fn summarize(series: &MultivariateSeries) -> Result<String, CliError> {
    let gaps = match series.gap().map_err(|e| CliError::Data(e.to_string()))? {
        None => "none".to_string(),
        Some(g) => format!(
            "{} missing target value(s) at rows {}..={} ({} to {})",
            g.len(),
            g.start_index,
            g.end_index,
            series.timestamps()[g.start_index],
            series.timestamps()[g.end_index]
        ),
    };
    Ok(format!(
        "S={}, N={}, step={}, gaps: {gaps}",
        series.len(),
        series.n_vars(),
        format_step(series.step())
    ))
}

fn read_series(path: &Path, time: &str, target: &str) -> Result<MultivariateSeries, CliError> {
    read_series_csv(path, time, target)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn cmd_validate(csv: &Path, time: &str, target: &str) -> Result<(), CliError> {
    let series = read_series(csv, time, target)?;
    println!("{}", summarize(&series)?);
    Ok(())
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn cmd_hpo(cfg: &RunConfig, seed: u64, out: &Path) -> Result<(), CliError> {
    let series = read_series(&cfg.data, &cfg.time_column, &cfg.target)?;
    let full = prepare_series(&series, cfg.temporal_features)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let scaler = fit_scaler(&full).map_err(|e| CliError::Data(e.to_string()))?;
    let scaled = apply_scaler(&full, &scaler).map_err(|e| CliError::Data(e.to_string()))?;
    let hpo = cfg.hpo_config(seed);
    let result =
        optimize(&scaled, &cfg.space(), &hpo).map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut history = Vec::new();
    write_history_csv(&mut history, &result, hpo.k)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(&out.join("history.csv"), &history)?;
    let best = json!({
        "architecture": result.best,
        "mean_mse": result.best_performance,
        "surrogate": hpo.surrogate,
        "evaluations": result.history.len(),
        "seed": seed,
    });
    write_file(
        &out.join("best.json"),
        serde_json::to_string_pretty(&best)
            .expect("json")
            .as_bytes(),
    )?;
    let train = cfg.train_config(crate::derive_seed(seed, &[0xf17a]));
    let model = finalize_model(&full, &result.best, cfg.ensemble_size(), &train)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(&out.join("model.json"), model.to_json().as_bytes())?;

    let a = result.best;
    println!(
        "best: batch={} epochs={} layers={} nodes={} dropout={:.1} lag={} mean_mse={}",
        a.batch_size,
        a.epochs,
        a.layers,
        a.nodes_per_layer,
        a.dropout_rate,
        a.lag,
        result.best_performance
    );
    Ok(())
}

pub fn cmd_impute(cfg: &RunConfig, model_path: &Path, out: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(model_path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", model_path.display())))?;
    let model = ImputationModel::from_json(&text).map_err(|e| match e {
        ImputeError::Invalid(m) => config_issue("model", m),
        other => CliError::Usage(other.to_string()),
    })?;
    let series = read_series(&cfg.data, &cfg.time_column, &cfg.target)?;
    let imputation = impute(&series, &model).map_err(|e| match e {
        ImputeError::Mlp(m) => CliError::Runtime(m.to_string()),
        other => CliError::Data(other.to_string()),
    })?;
    let mut buf = Vec::new();
    write_imputed_csv(
        &mut buf,
        &cfg.time_column,
        &imputation.series,
        &imputation.imputed_mask(),
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(out, &buf)?;
    match imputation.gap {
        Some(g) => println!("filled {} value(s) into {}", g.len(), out.display()),
        None => println!("no gap; copied series to {}", out.display()),
    }
    Ok(())
}

pub fn cmd_evaluate(cfg: &RunConfig, seed: u64, out: &Path) -> Result<(), CliError> {
    if cfg.windows.is_empty() {
        return Err(config_issue(
            "windows",
            "evaluate needs at least one window",
        ));
    }
    let series = read_series(&cfg.data, &cfg.time_column, &cfg.target)?;
    let plan = ExperimentPlan {
        series,
        windows: cfg.windows.clone(),
        methods: cfg.methods.clone(),
        hpo: cfg.hpo_config(seed),
        space: cfg.space(),
        ensemble_size: cfg.ensemble_size(),
        frequency: cfg.frequency,
        temporal_features: cfg.temporal_features,
        seed,
        record_timing: cfg.record_timing,
    };
    let report = run_experiment(&plan).map_err(|e| CliError::Data(e.to_string()))?;
    emit_report(&report, out).map_err(|e| CliError::Runtime(e.to_string()))?;
    let failures = report.failures();
    let mut err = std::io::stderr().lock();
    for f in &failures {
        let _ = writeln!(
            err,
            "failed: {} {}: {}",
            report.windows[f.window].window.label(),
            f.method,
            f.failure.as_deref().unwrap_or("")
        );
    }
    if failures.len() == report.cells.len() {
        return Err(CliError::Runtime(
            "every (window, method) cell failed".into(),
        ));
    }
    println!(
        "{} of {} cells succeeded; report in {}",
        report.cells.len() - failures.len(),
        report.cells.len(),
        out.display()
    );
    Ok(())
}
