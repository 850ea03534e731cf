use std::fs;
use std::path::Path;

use serde::Serialize;
use wolffkit::Point;

use crate::CliError;

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io(path, e))
}

/// One row per node: coordinates `x1..xn`, then `value`, then `error_bound`.
pub fn write_field_csv(path: &Path, nodes: &[Point], values: &[f64], bounds: &[f64]) -> Result<(), CliError> {
    let dim = nodes.first().map_or(0, Point::dim);
    let mut w = csv::Writer::from_path(path).map_err(|e| io(path, e))?;
    let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    header.push("value".into());
    header.push("error_bound".into());
    w.write_record(&header).map_err(|e| io(path, e))?;
    for ((x, v), b) in nodes.iter().zip(values).zip(bounds) {
        let mut row: Vec<String> = x.coords().iter().map(f64::to_string).collect();
        row.push(v.to_string());
        row.push(b.to_string());
        w.write_record(&row).map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

/// The `value` column of a field CSV written by [`write_field_csv`].
pub fn read_field_values(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io(path, e))?;
    let col = r
        .headers()
        .map_err(|e| io(path, e))?
        .iter()
        .position(|h| h == "value")
        .ok_or_else(|| CliError::Config(format!("{}: no value column", path.display())))?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| io(path, e))?;
            rec[col]
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        })
        .collect()
}
