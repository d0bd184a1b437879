use std::fs;
use std::path::{Path, PathBuf};

use super::plot::{line_chart_svg, scatter_svg, Line};
use super::{EvalError, ImputationReport};
use crate::series::format_timestamp;

pub const RESULTS_HEADER: [&str; 12] = [
    "window_from",
    "window_to",
    "n_obs",
    "method",
    "rmse",
    "batch",
    "epochs",
    "layers",
    "nodes",
    "dropout",
    "lag",
    "seconds",
];

fn io_err(path: &Path, e: impl std::fmt::Display) -> EvalError {
    EvalError::Io(format!("{}: {e}", path.display()))
}

/// `results.csv` contents: one row per (window, method). Failed cells keep
/// their row with an empty `rmse`. `seconds` stays empty unless timing was
/// requested, so identical runs give identical bytes.
pub fn results_csv(report: &ImputationReport) -> Result<String, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| EvalError::Io(e.to_string());
    w.write_record(RESULTS_HEADER).map_err(err)?;
    for c in &report.cells {
        let win = &report.windows[c.window];
        let mut row = vec![
            win.window.from.to_string(),
            win.window.to.to_string(),
            win.held_out.truth.len().to_string(),
            c.method.to_string(),
            c.rmse.map_or(String::new(), |v| v.to_string()),
        ];
        match &c.architecture {
            Some(a) => row.extend(a.as_row()),
            None => row.extend(std::iter::repeat(String::new()).take(6)),
        }
        row.push(if report.record_timing {
            format!("{:.3}", c.seconds)
        } else {
            String::new()
        });
        w.write_record(&row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| EvalError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes `results.csv`, one `fill_<from>_<to>_<method>.csv` per successful
/// cell, a line chart per window and a scatter plot per successful cell.
/// Returns the written paths.
pub fn emit_report(report: &ImputationReport, dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, contents: String| -> Result<(), EvalError> {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
        written.push(path);
        Ok(())
    };
    put("results.csv".into(), results_csv(report)?)?;
    for (wi, win) in report.windows.iter().enumerate() {
        let label = win.window.label();
        let daily = win
            .held_out
            .timestamps
            .iter()
            .all(|t| t.time() == chrono::NaiveTime::MIN);
        let times: Vec<String> = win
            .held_out
            .timestamps
            .iter()
            .map(|t| format_timestamp(t, daily))
            .collect();
        let truth = &win.held_out.truth;
        let cells: Vec<_> = report
            .cells
            .iter()
            .filter(|c| c.window == wi && c.failure.is_none())
            .collect();
        for c in &cells {
            let mut w = csv::Writer::from_writer(Vec::new());
            let err = |e: csv::Error| EvalError::Io(e.to_string());
            w.write_record(["time", "truth", "prediction"])
                .map_err(err)?;
            for ((t, y), p) in times.iter().zip(truth).zip(&c.fill) {
                w.write_record([t.clone(), y.to_string(), p.to_string()])
                    .map_err(err)?;
            }
            let bytes = w.into_inner().map_err(|e| EvalError::Io(e.to_string()))?;
            put(
                format!("fill_{label}_{}.csv", c.method),
                String::from_utf8(bytes).expect("utf-8"),
            )?;
            put(
                format!("scatter_{label}_{}.svg", c.method),
                scatter_svg(&format!("{} {label}", c.method), truth, &c.fill),
            )?;
        }
        let mut lines = vec![Line {
            name: "truth",
            values: truth,
        }];
        lines.extend(cells.iter().map(|c| Line {
            name: c.method.name(),
            values: &c.fill,
        }));
        let first = times.first().map_or("", String::as_str);
        let last = times.last().map_or("", String::as_str);
        put(
            format!("series_{label}.svg"),
            line_chart_svg(&format!("gap {label}"), (first, last), &lines),
        )?;
    }
    Ok(written)
}
