use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::evaluation::{Method, Window};
use crate::hpo::{HpoConfig, HyperparameterSpace, SurrogateKind, DIMENSIONS};
use crate::mlp::TrainConfig;
use crate::series::DEFAULT_TRAIN_FRACTION;

/// One schema problem: where in the document, and what is wrong.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl ConfigIssue {
    fn new(path: &str, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub n0: usize,
    pub n: usize,
    pub k: usize,
    pub surrogate: SurrogateKind,
    pub train_fraction: f64,
}

impl Default for SearchSection {
    fn default() -> Self {
        let d = HpoConfig::default();
        Self {
            n0: d.n0,
            n: d.n,
            k: d.k,
            surrogate: d.surrogate,
            train_fraction: DEFAULT_TRAIN_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub shuffle: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            learning_rate: d.learning_rate,
            beta1: d.beta1,
            beta2: d.beta2,
            epsilon: d.epsilon,
            shuffle: d.shuffle,
        }
    }
}

fn default_time() -> String {
    "time".into()
}

fn default_frequency() -> usize {
    365
}

fn default_true() -> bool {
    true
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// JSON run configuration. Relative paths are resolved against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: PathBuf,
    #[serde(default = "default_time")]
    pub time_column: String,
    pub target: String,
    /// Steps per season for the seasonal baseline.
    #[serde(default = "default_frequency")]
    pub frequency: usize,
    #[serde(default = "default_true")]
    pub temporal_features: bool,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub space: Option<HyperparameterSpace>,
    /// Members of the final ensemble; defaults to `search.k`.
    #[serde(default)]
    pub ensemble_size: Option<usize>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub windows: Vec<Window>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Record wall-clock seconds in `results.csv`.
    #[serde(default)]
    pub record_timing: bool,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, Vec<ConfigIssue>> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            vec![ConfigIssue::new(&path, e.into_inner().to_string())]
        })?;
        let issues = config.issues();
        if issues.is_empty() {
            Ok(config)
        } else {
            Err(issues)
        }
    }

    pub fn load(path: &Path) -> Result<Self, Vec<ConfigIssue>> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| vec![ConfigIssue::new(".", format!("{}: {e}", path.display()))])?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.data = base.join(&config.data);
        config.output_dir = base.join(&config.output_dir);
        Ok(config)
    }

    /// Semantic checks beyond the JSON shape.
    pub fn issues(&self) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        if self.target.is_empty() {
            out.push(ConfigIssue::new("target", "must not be empty"));
        }
        if self.frequency < 2 {
            out.push(ConfigIssue::new("frequency", "must be at least 2"));
        }
        if self.methods.is_empty() {
            out.push(ConfigIssue::new("methods", "must list at least one method"));
        }
        if self.ensemble_size == Some(0) {
            out.push(ConfigIssue::new("ensemble_size", "must be at least 1"));
        }
        for (i, w) in self.windows.iter().enumerate() {
            if w.from > w.to {
                out.push(ConfigIssue::new(
                    &format!("windows[{i}]"),
                    "`from` is after `to`",
                ));
            }
        }
        out.extend(search_issues(&self.search, &self.train));
        out
    }

    pub fn space(&self) -> HyperparameterSpace {
        self.space
            .clone()
            .unwrap_or_else(HyperparameterSpace::default_grid)
    }

    pub fn hpo_config(&self, seed: u64) -> HpoConfig {
        HpoConfig {
            n0: self.search.n0,
            n: self.search.n,
            k: self.search.k,
            surrogate: self.search.surrogate,
            seed,
            train_fraction: self.search.train_fraction,
            train: self.train_config(seed),
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.learning_rate,
            beta1: self.train.beta1,
            beta2: self.train.beta2,
            epsilon: self.train.epsilon,
            shuffle: self.train.shuffle,
            seed,
        }
    }

    pub fn ensemble_size(&self) -> usize {
        self.ensemble_size.unwrap_or(self.search.k)
    }
}

/// Checks a search/train pair, reporting against the config paths.
pub fn search_issues(search: &SearchSection, train: &TrainSection) -> Vec<ConfigIssue> {
    let mut out = Vec::new();
    let need = DIMENSIONS + 2;
    if search.n0 < need {
        out.push(ConfigIssue::new(
            "search.n0",
            format!(
                "{} initial points given, the surrogate needs at least {need}",
                search.n0
            ),
        ));
    }
    if search.n <= search.n0 {
        out.push(ConfigIssue::new("search.n", "budget must exceed search.n0"));
    }
    if search.k == 0 {
        out.push(ConfigIssue::new("search.k", "must be at least 1"));
    }
    if !(search.train_fraction > 0.0 && search.train_fraction < 1.0) {
        out.push(ConfigIssue::new(
            "search.train_fraction",
            "must lie in (0, 1)",
        ));
    }
    if !(train.learning_rate > 0.0 && train.learning_rate.is_finite()) {
        out.push(ConfigIssue::new("train.learning_rate", "must be positive"));
    }
    for (name, b) in [("train.beta1", train.beta1), ("train.beta2", train.beta2)] {
        if !(0.0..1.0).contains(&b) {
            out.push(ConfigIssue::new(name, "must lie in [0, 1)"));
        }
    }
    if !(train.epsilon > 0.0) {
        out.push(ConfigIssue::new("train.epsilon", "must be positive"));
    }
    out
}
