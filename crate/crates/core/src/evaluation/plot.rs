//! Minimal self-contained SVG charts.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;
const SIDE: f64 = 360.0;
const COLORS: [&str; 7] = [
    "#000000", "#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

/// One named polyline; `values[i]` is plotted at x position `i`.
#[derive(Debug, Clone)]
pub struct Line<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Overlaid line chart; the first line is usually the truth.
pub fn line_chart_svg(title: &str, x_labels: (&str, &str), lines: &[Line<'_>]) -> String {
    let n = lines.iter().map(|l| l.values.len()).max().unwrap_or(0);
    let (lo, hi) = range(lines.iter().flat_map(|l| l.values.iter().copied()));
    let pw = WIDTH - 2.0 * MARGIN;
    let ph = HEIGHT - 2.0 * MARGIN;
    let x = |i: usize| {
        MARGIN
            + if n > 1 {
                i as f64 / (n - 1) as f64 * pw
            } else {
                0.0
            }
    };
    let y = |v: f64| MARGIN + ph - (v - lo) / (hi - lo) * ph;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>"##
    );
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{}" font-size="11">{}</text>"#,
        HEIGHT - 20.0,
        escape(x_labels.0)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#,
        WIDTH - MARGIN,
        HEIGHT - 20.0,
        escape(x_labels.1)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{hi:.4}</text>"#,
        MARGIN - 4.0,
        MARGIN + 4.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{lo:.4}</text>"#,
        MARGIN - 4.0,
        MARGIN + ph
    );
    for (k, line) in lines.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = line
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(i, &v)| format!("{:.2},{:.2}", x(i), y(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            MARGIN + 8.0,
            MARGIN + 14.0 * (k + 1) as f64,
            escape(line.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Square truth-vs-prediction scatter with shared axis ranges, so a perfect
/// predictor puts every point on the drawn diagonal.
pub fn scatter_svg(title: &str, truth: &[f64], prediction: &[f64]) -> String {
    let (lo, hi) = range(truth.iter().chain(prediction).copied());
    let size = SIDE + 2.0 * MARGIN;
    let px = |v: f64| MARGIN + (v - lo) / (hi - lo) * SIDE;
    let py = |v: f64| MARGIN + SIDE - (v - lo) / (hi - lo) * SIDE;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        size / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{SIDE}" height="{SIDE}" fill="none" stroke="#888"/>"##
    );
    let _ = writeln!(
        s,
        r##"<line class="diagonal" x1="{}" y1="{}" x2="{}" y2="{}" stroke="#888" stroke-dasharray="4 3"/>"##,
        px(lo),
        py(lo),
        px(hi),
        py(hi)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">truth</text>"#,
        size / 2.0,
        size - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" font-size="11" transform="rotate(-90 14 {})">prediction</text>"#,
        size / 2.0,
        size / 2.0
    );
    for (&t, &p) in truth.iter().zip(prediction) {
        if t.is_finite() && p.is_finite() {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.4}" cy="{:.4}" r="2.5" fill="#1f77b4" fill-opacity="0.6"/>"##,
                px(t),
                py(p)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
