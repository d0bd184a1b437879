mod common;

use std::path::Path;
use std::process::{Command, Output};

use chrono::NaiveDate;

fn gapfill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gapfill"))
        .args(args)
        .env_remove("GAPFILL_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// 150 daily rows, target `y` missing over `gap` (row indices, inclusive).
fn small_csv(path: &Path, gap: Option<(usize, usize)>) {
    let rows = 150;
    let data: Vec<Vec<Option<f64>>> = (0..rows)
        .map(|i| {
            let t = i as f64;
            let x = (t / 9.0).sin();
            let missing = gap.is_some_and(|(a, b)| (a..=b).contains(&i));
            let y = (!missing).then(|| 0.7 * x + 0.1 * (t / 30.0).cos());
            vec![y, Some(x)]
        })
        .collect();
    let stamps = common::daily_stamps(NaiveDate::from_ymd_opt(2015, 1, 1).unwrap(), rows);
    common::write_csv(path, &stamps, &["y", "x"], &data);
}

fn small_config(dir: &Path, data: &str, extra: serde_json::Value) -> std::path::PathBuf {
    let mut config = serde_json::json!({
        "data": data,
        "target": "y",
        "search": {"n0": 8, "n": 10, "k": 1},
        "space": {
            "batch_size": [16, 32],
            "epochs": [2, 3],
            "layers": [1, 2],
            "nodes_per_layer": [4, 8],
            "dropout_rate": [0.0, 0.1],
            "lag": [2, 3]
        },
        "seed": 3
    });
    for (k, v) in extra.as_object().unwrap() {
        config[k] = v.clone();
    }
    let path = dir.join("config.json");
    std::fs::write(&path, config.to_string()).unwrap();
    path
}

#[test]
fn validate_summarizes_a_clean_series() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    small_csv(&csv, None);
    let o = gapfill(&["validate", "--csv", p(&csv), "--target", "y"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "S=150, N=2, step=1d, gaps: none");
}

#[test]
fn validate_reports_the_gap() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    small_csv(&csv, Some((40, 49)));
    let o = gapfill(&["validate", "--csv", p(&csv), "--target", "y"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(
        stdout(&o).contains("10 missing target value(s) at rows 40..=49"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn missing_support_value_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    std::fs::write(
        &csv,
        "time,y,x\n2015-01-01,1,2\n2015-01-02,2,\n2015-01-03,3,4\n",
    )
    .unwrap();
    let o = gapfill(&["validate", "--csv", p(&csv), "--target", "y"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains('x'), "{}", stderr(&o));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(gapfill(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(gapfill(&["--help"]).status.code(), Some(0));
}

#[test]
fn too_small_initial_design_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    small_csv(&csv, None);
    let cfg = small_config(dir.path(), "d.csv", serde_json::json!({}));
    let o = gapfill(&[
        "hpo",
        "--config",
        p(&cfg),
        "--init",
        "5",
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let line = stderr(&o)
        .lines()
        .find(|l| l.starts_with('{'))
        .unwrap()
        .to_string();
    let v: serde_json::Value = serde_json::from_str(&line).unwrap();
    assert_eq!(v["error"], "config");
    assert_eq!(v["path"], "search.n0");
}

#[test]
fn unknown_config_key_names_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"data": "d.csv", "target": "y", "serach": {}}"#).unwrap();
    let o = gapfill(&["evaluate", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(r#""path":"serach""#), "{}", stderr(&o));
}

#[test]
fn hpo_then_impute_fills_the_gap() {
    let dir = tempfile::tempdir().unwrap();
    small_csv(&dir.path().join("train.csv"), None);
    small_csv(&dir.path().join("gappy.csv"), Some((60, 79)));
    let cfg = small_config(dir.path(), "train.csv", serde_json::json!({}));
    let out = dir.path().join("hpo");
    let o = gapfill(&["--jobs", "1", "hpo", "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let history = std::fs::read_to_string(out.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 11);
    assert!(history.starts_with(
        "iteration,batch_size,epochs,layers,nodes_per_layer,dropout_rate,lag,trial_1,mean_mse"
    ));
    let best: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("best.json")).unwrap()).unwrap();
    assert!(best["architecture"]["lag"].as_u64().is_some());

    let cfg = small_config(dir.path(), "gappy.csv", serde_json::json!({}));
    let filled = dir.path().join("filled.csv");
    let o = gapfill(&[
        "impute",
        "--config",
        p(&cfg),
        "--model",
        p(&out.join("model.json")),
        "--out",
        p(&filled),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&filled).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 151);
    for (i, line) in lines[1..].iter().enumerate() {
        let y = line.split(',').nth(1).unwrap();
        assert!(y.parse::<f64>().is_ok(), "row {i}: {line}");
    }
    let source = std::fs::read_to_string(dir.path().join("gappy.csv")).unwrap();
    let src: Vec<&str> = source.lines().collect();
    // Observed rows keep their text value.
    assert_eq!(lines[10].split(',').nth(1), src[10].split(',').nth(1));
    assert!(lines[10].ends_with(",false"));
    assert!(lines[61].ends_with(",true") && lines[80].ends_with(",true"));
    assert!(lines[81].ends_with(",false"));
}

#[test]
fn impute_without_gap_copies_the_series() {
    let dir = tempfile::tempdir().unwrap();
    small_csv(&dir.path().join("d.csv"), None);
    let cfg = small_config(dir.path(), "d.csv", serde_json::json!({}));
    let out = dir.path().join("hpo");
    assert_eq!(
        gapfill(&["hpo", "--config", p(&cfg), "--out", p(&out)])
            .status
            .code(),
        Some(0)
    );
    let filled = dir.path().join("f.csv");
    let o = gapfill(&[
        "impute",
        "--config",
        p(&cfg),
        "--model",
        p(&out.join("model.json")),
        "--out",
        p(&filled),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("no gap"));
    assert_eq!(
        std::fs::read_to_string(&filled).unwrap().lines().count(),
        151
    );
}

#[test]
fn corrupted_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    small_csv(&dir.path().join("d.csv"), Some((60, 79)));
    let cfg = small_config(dir.path(), "d.csv", serde_json::json!({}));
    let model = dir.path().join("model.json");
    std::fs::write(&model, r#"{"architecture": 12}"#).unwrap();
    let o = gapfill(&[
        "impute",
        "--config",
        p(&cfg),
        "--model",
        p(&model),
        "--out",
        p(&dir.path().join("f.csv")),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(!dir.path().join("f.csv").exists());
}

#[test]
fn evaluate_with_baselines_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    small_csv(&dir.path().join("d.csv"), None);
    let cfg = small_config(
        dir.path(),
        "d.csv",
        serde_json::json!({
            "methods": ["linear", "locf"],
            "windows": [{"from": "2015-03-01", "to": "2015-03-20"}]
        }),
    );
    let out = dir.path().join("report");
    let o = gapfill(&["evaluate", "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let results = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let rows: Vec<&str> = results.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("2015-03-01,2015-03-20,20,linear,"));
    assert!(out.join("series_2015-03-01_2015-03-20.svg").exists());
    assert!(out.join("scatter_2015-03-01_2015-03-20_locf.svg").exists());
}

#[test]
fn evaluate_without_windows_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    small_csv(&dir.path().join("d.csv"), None);
    let cfg = small_config(dir.path(), "d.csv", serde_json::json!({}));
    assert_eq!(
        gapfill(&["evaluate", "--config", p(&cfg)]).status.code(),
        Some(1)
    );
}
