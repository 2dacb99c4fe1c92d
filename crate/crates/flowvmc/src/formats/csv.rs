//! Tabular outputs. Numbers use Rust's shortest round-trip formatting, so
//! identical values always produce identical bytes.

use std::fs::{self, File, OpenOptions};
use std::path::Path;

use flowvmc_core::estimators::VarianceRow;
use flowvmc_core::optimize::RunHistory;
use flowvmc_core::tdvp::Trajectory;

use crate::error::{CliError, CliResult};

pub const HISTORY_COLUMNS: [&str; 7] = ["iter", "energy", "stderr", "alpha", "lr", "grad_norm", "seconds"];
pub const TRAJECTORY_COLUMNS: [&str; 4] = ["t", "log_a", "b", "energy"];
pub const VARIANCE_COLUMNS: [&str; 5] = ["a", "var_canonical", "var_adjoint", "stderr_canonical", "stderr_adjoint"];
pub const COMPARISON_COLUMNS: [&str; 4] = ["seed", "flow_energy", "flow_stderr", "gaussian_energy"];

pub fn num(v: f64) -> String {
    format!("{v}")
}

/// Writes a header and string records.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let file = File::create(path).map_err(CliError::io(path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(CliError::io(path))?;
    Ok(())
}

/// Appends one record, writing the header first if the file is new.
pub fn append_row(path: &Path, header: &[&str], row: &[String]) -> CliResult<()> {
    let fresh = !path.exists() || fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(CliError::io(path))?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(header)?;
    }
    w.write_record(row)?;
    w.flush().map_err(CliError::io(path))?;
    Ok(())
}

/// Header and records of a CSV file.
pub fn read_table(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

pub fn write_history(path: &Path, h: &RunHistory) -> CliResult<()> {
    let rows: Vec<Vec<String>> = h
        .rows
        .iter()
        .map(|r| {
            vec![
                r.iter.to_string(),
                num(r.energy),
                num(r.stderr),
                num(r.alpha),
                num(r.lr),
                num(r.grad_norm),
                num(r.seconds),
            ]
        })
        .collect();
    write_table(path, &HISTORY_COLUMNS, &rows)
}

pub fn write_trajectory(path: &Path, t: &Trajectory) -> CliResult<()> {
    let rows: Vec<Vec<String>> = t
        .states
        .iter()
        .map(|s| vec![num(s.t), num(s.log_a), num(s.b), num(s.energy())])
        .collect();
    write_table(path, &TRAJECTORY_COLUMNS, &rows)
}

pub fn write_variance(path: &Path, rows: &[VarianceRow]) -> CliResult<()> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                num(r.a),
                num(r.var_canonical),
                num(r.var_adjoint),
                num(r.stderr_canonical),
                num(r.stderr_adjoint),
            ]
        })
        .collect();
    write_table(path, &VARIANCE_COLUMNS, &rows)
}
