//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};
use gapfill::series::MultivariateSeries;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const DESK_STEPS: usize = 2000;
pub const DESK_NAMES: [&str; 4] = ["s1", "s2", "s3", "y"];
/// First and last row of the held-out stretch in the desk-scale series.
pub const DESK_GAP: (usize, usize) = (1500, 1589);

pub fn desk_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2010, 1, 1).unwrap()
}

pub fn daily_stamps(start: NaiveDate, rows: usize) -> Vec<NaiveDateTime> {
    let t0 = start.and_hms_opt(0, 0, 0).unwrap();
    (0..rows).map(|i| t0 + TimeDelta::days(i as i64)).collect()
}

/// Desk-scale synthetic daily series: three smooth supports and a target
/// that is a clipped nonlinear function of the first two, plus an annual
/// cycle and Gaussian noise (sd 0.02). Columns: s1, s2, s3, y.
pub fn desk_rows() -> Vec<[f64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let noise = Normal::new(0.0, 0.02).unwrap();
    let tau = std::f64::consts::TAU;
    (0..DESK_STEPS)
        .map(|i| {
            let t = i as f64;
            let s1 = 0.5 + 0.4 * (tau * t / 73.0).sin() + 0.1 * (tau * t / 17.0).cos();
            let s2 = 1.0 + 0.6 * (tau * t / 41.0 + 0.7).sin();
            let s3 = (tau * t / 365.0).cos();
            let season = 0.3 * (tau * t / 365.0).sin();
            let core = ((4.0 * (s1 - 0.5)).tanh() * s2 + season).clamp(-0.8, 0.8);
            [s1, s2, s3, core + noise.sample(&mut rng)]
        })
        .collect()
}

pub fn desk_series() -> MultivariateSeries {
    let values = desk_rows().iter().flat_map(|r| r.map(Some)).collect();
    MultivariateSeries::new(
        daily_stamps(desk_start(), DESK_STEPS),
        DESK_NAMES.iter().map(|s| s.to_string()).collect(),
        values,
        3,
    )
    .unwrap()
}

/// Calendar dates covering the held-out stretch.
pub fn desk_window() -> (NaiveDate, NaiveDate) {
    let d = |i: usize| desk_start() + TimeDelta::days(i as i64);
    (d(DESK_GAP.0), d(DESK_GAP.1))
}

/// CSV with a `time` column followed by the named columns; `None` is written
/// as an empty cell.
pub fn write_csv(path: &Path, stamps: &[NaiveDateTime], names: &[&str], rows: &[Vec<Option<f64>>]) {
    let mut s = String::from("time");
    for n in names {
        write!(s, ",{n}").unwrap();
    }
    s.push('\n');
    for (t, row) in stamps.iter().zip(rows) {
        write!(s, "{}", t.format("%Y-%m-%d")).unwrap();
        for v in row {
            match v {
                Some(v) => write!(s, ",{v}").unwrap(),
                None => s.push(','),
            }
        }
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}

pub fn write_desk_csv(path: &Path) {
    let rows: Vec<Vec<Option<f64>>> = desk_rows()
        .iter()
        .map(|r| r.iter().map(|&v| Some(v)).collect())
        .collect();
    write_csv(
        path,
        &daily_stamps(desk_start(), DESK_STEPS),
        &DESK_NAMES,
        &rows,
    );
}
