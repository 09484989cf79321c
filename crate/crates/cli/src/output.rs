//! Artifact files: `trace.csv`, `summary.json`, `record.json`, `oracle.json`
//! and `report.json`.

use crate::error::CliError;
use nonlinritz::optimizer::RunRecord;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const TRACE_COLUMNS: [&str; 11] = [
    "iter",
    "K",
    "K_reduced",
    "grad_map_norm",
    "gradW_norm",
    "gamma",
    "step_norm",
    "decrease_lhs",
    "decrease_rhs",
    "delta_star",
    "stop_reason",
];

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// One parsed trace row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub reduced_energy: f64,
    pub grad_map_norm: Option<f64>,
    pub grad_w_norm: f64,
    pub gamma: Option<f64>,
    pub step_norm: Option<f64>,
    pub decrease_lhs: f64,
    pub decrease_rhs: f64,
    pub delta_star: Option<f64>,
    pub stop_reason: String,
}

pub fn trace_rows(record: &RunRecord, delta_star: Option<&[f64]>) -> Vec<TraceRow> {
    let last = record.rows.len() - 1;
    record
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| TraceRow {
            iter: r.iter,
            energy: r.energy,
            reduced_energy: r.reduced_energy,
            grad_map_norm: r.grad_map_norm,
            grad_w_norm: r.grad_w_norm,
            gamma: r.gamma,
            step_norm: r.step_norm,
            decrease_lhs: r.decrease.achieved,
            decrease_rhs: r.decrease.guaranteed,
            delta_star: delta_star.map(|d| d[i]),
            stop_reason: if i == last {
                record.termination.as_str().into()
            } else {
                String::new()
            },
        })
        .collect()
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(&path.display().to_string(), e))?;
    let io = |e: csv::Error| CliError::io(&path.display().to_string(), e);
    w.write_record(TRACE_COLUMNS).map_err(io)?;
    for r in rows {
        w.write_record([
            r.iter.to_string(),
            fmt_f64(r.energy),
            fmt_f64(r.reduced_energy),
            fmt_opt(r.grad_map_norm),
            fmt_f64(r.grad_w_norm),
            fmt_opt(r.gamma),
            fmt_opt(r.step_norm),
            fmt_f64(r.decrease_lhs),
            fmt_f64(r.decrease_rhs),
            fmt_opt(r.delta_star),
            r.stop_reason.clone(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(&path.display().to_string(), e))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>, CliError> {
    let name = path.display().to_string();
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(&name, e))?;
    let header = r.headers().map_err(|e| CliError::io(&name, e))?.clone();
    if header.iter().ne(TRACE_COLUMNS) {
        return Err(CliError::Io(format!(
            "{name}: unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::io(&name, e))?;
        let bad = |col: &str| CliError::Io(format!("{name}: row {}: bad value in column {col}", line + 1));
        let num = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(TRACE_COLUMNS[i]));
        let opt = |i: usize| {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        out.push(TraceRow {
            iter: rec[0].parse().map_err(|_| bad("iter"))?,
            energy: num(1)?,
            reduced_energy: num(2)?,
            grad_map_norm: opt(3)?,
            grad_w_norm: num(4)?,
            gamma: opt(5)?,
            step_norm: opt(6)?,
            decrease_lhs: num(7)?,
            decrease_rhs: num(8)?,
            delta_star: opt(9)?,
            stop_reason: rec[10].to_string(),
        });
    }
    Ok(out)
}

/// Headline numbers of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Energy of the returned iterate (after the final solve).
    pub best_energy: f64,
    pub best_iter: usize,
    pub best_xi: Vec<f64>,
    pub best_w: Vec<f64>,
    pub iterations: usize,
    pub termination: String,
    /// `L(γc)^ν + μc` at the last step, with `c` its gradient-mapping norm;
    /// null when no `L` is known.
    pub quasi_stationarity_level: Option<f64>,
    pub oracle_k_star: Option<f64>,
    pub config_hash: String,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::io(&path.display().to_string(), e))?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| CliError::io(&path.display().to_string(), e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let s = std::fs::read_to_string(path).map_err(|e| CliError::io(&path.display().to_string(), e))?;
    serde_json::from_str(&s).map_err(|e| CliError::io(&path.display().to_string(), e))
}
