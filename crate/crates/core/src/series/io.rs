use std::io::{Read, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};

use super::{MultivariateSeries, SeriesError};

/// A parsed CSV file before any typing: a header plus string cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, SeriesError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| SeriesError::Csv(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = rdr
            .records()
            .map(|r| {
                r.map(|rec| rec.iter().map(str::to_string).collect())
                    .map_err(|e| SeriesError::Csv(e.to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { headers, rows })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, SeriesError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| SeriesError::Csv(format!("{}: {e}", path.display())))?;
        Self::from_reader(std::io::BufReader::new(file))
    }
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return d.and_hms_opt(0, 0, 0);
    }
    [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%d %H:%M",
    ]
    .iter()
    .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

fn parse_cell(s: &str) -> Result<Option<f64>, ()> {
    if s.is_empty() || s.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(()),
    }
}

fn dedup_names(headers: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(headers.len());
    for h in headers {
        let mut name = h.clone();
        let mut i = 2;
        while out.contains(&name) {
            name = format!("{h}_{i}");
            i += 1;
        }
        out.push(name);
    }
    out
}

/// Types a raw table into a [`MultivariateSeries`].
///
/// The time column is removed; every other column becomes a variable, with
/// `target` marking the gap-bearing one. Row numbers in errors are 0-based
/// data rows (the header is not counted).
pub fn validate_series(
    raw: &RawTable,
    target: &str,
    time_column: &str,
) -> Result<MultivariateSeries, SeriesError> {
    let headers = dedup_names(&raw.headers);
    let time_idx = headers
        .iter()
        .position(|h| h == time_column)
        .ok_or_else(|| SeriesError::MissingColumn(time_column.to_string()))?;
    let value_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != time_idx).collect();
    let names: Vec<String> = value_cols.iter().map(|&c| headers[c].clone()).collect();
    let target_index = names
        .iter()
        .position(|n| n == target)
        .ok_or_else(|| SeriesError::MissingColumn(target.to_string()))?;
    if raw.rows.len() < 2 {
        return Err(SeriesError::TooShort(raw.rows.len()));
    }

    let mut timestamps = Vec::with_capacity(raw.rows.len());
    let mut values = Vec::with_capacity(raw.rows.len() * names.len());
    for (row, cells) in raw.rows.iter().enumerate() {
        let ts = &cells[time_idx];
        timestamps.push(
            parse_timestamp(ts).ok_or_else(|| SeriesError::BadTimestamp {
                row,
                value: ts.clone(),
            })?,
        );
        for (j, &c) in value_cols.iter().enumerate() {
            let v = parse_cell(&cells[c]).map_err(|()| SeriesError::UnparseableCell {
                row,
                column: names[j].clone(),
                value: cells[c].clone(),
            })?;
            values.push(v);
        }
    }
    MultivariateSeries::new(timestamps, names, values, target_index)
}

/// Reads and validates a CSV file in one go.
pub fn read_series_csv(
    path: impl AsRef<Path>,
    time_column: &str,
    target: &str,
) -> Result<MultivariateSeries, SeriesError> {
    validate_series(&RawTable::from_path(path)?, target, time_column)
}

pub(crate) fn format_timestamp(ts: &NaiveDateTime, daily: bool) -> String {
    if daily {
        ts.format("%Y-%m-%d").to_string()
    } else {
        ts.format("%Y-%m-%dT%H:%M").to_string()
    }
}

/// Writes the series in the ingestion format (temporal feature columns
/// dropped) with a trailing boolean `imputed` column.
pub fn write_imputed_csv<W: Write>(
    writer: W,
    time_column: &str,
    series: &MultivariateSeries,
    imputed: &[bool],
) -> Result<(), SeriesError> {
    let csv_err = |e: csv::Error| SeriesError::Csv(e.to_string());
    let n_orig = series.n_vars() - series.temporal_columns();
    let daily = series.is_daily();
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![time_column.to_string()];
    header.extend(series.names()[..n_orig].iter().cloned());
    header.push("imputed".into());
    w.write_record(&header).map_err(csv_err)?;
    for (row, ts) in series.timestamps().iter().enumerate() {
        let mut rec = vec![format_timestamp(ts, daily)];
        rec.extend(
            series.row(row)[..n_orig]
                .iter()
                .map(|v| v.map_or_else(|| "NaN".to_string(), |x| x.to_string())),
        );
        rec.push(imputed.get(row).copied().unwrap_or(false).to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| SeriesError::Csv(e.to_string()))?;
    Ok(())
}
