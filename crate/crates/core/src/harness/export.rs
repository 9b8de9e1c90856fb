//! CSV files consumed by the plotting front-end.
//!
//! Floats are written with 17 significant digits so a write/read round trip
//! reproduces every value bit for bit.

use std::fs;
use std::path::Path;

use super::{CostEntry, CostReport, HarnessError, MseTrace, ScenarioResult};

pub const TRACE_FILE: &str = "mse_traces.csv";
pub const COST_FILE: &str = "cost.csv";
pub const TRACE_HEADER: &str = "algorithm,iteration,mse_db,msd_db";
pub const COST_HEADER: &str = "algorithm,macs_per_node_iter,scalars_tx_per_node_iter";

fn io_error(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io { path: path.display().to_string(), source }
}

fn csv_error(path: &Path, line: usize, reason: impl Into<String>) -> HarnessError {
    HarnessError::Csv { path: path.display().to_string(), line, reason: reason.into() }
}

/// Writes the trace file and returns the number of data rows.
pub fn export_traces_csv(path: &Path, traces: &[MseTrace]) -> Result<usize, HarnessError> {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    let mut rows = 0;
    for trace in traces {
        rows += trace.mse_db.len();
        for (i, (mse, msd)) in trace.mse_db.iter().zip(&trace.msd_db).enumerate() {
            out.push_str(&format!("{},{},{:.16e},{:.16e}\n", trace.algorithm, i + 1, mse, msd));
        }
    }
    fs::write(path, out).map_err(|e| io_error(path, e))?;
    Ok(rows)
}

/// Writes the cost file and returns the number of data rows.
pub fn export_cost_csv(path: &Path, cost: &CostReport) -> Result<usize, HarnessError> {
    let mut out = String::from(COST_HEADER);
    out.push('\n');
    for entry in &cost.entries {
        out.push_str(&format!(
            "{},{},{:.16e}\n",
            entry.algorithm, entry.macs_per_node_iter, entry.scalars_tx_per_node_iter
        ));
    }
    fs::write(path, out).map_err(|e| io_error(path, e))?;
    Ok(cost.entries.len())
}

/// Writes both CSV files into `dir`, creating it if needed, and returns the
/// number of trace rows.
pub fn export_csv(dir: &Path, result: &ScenarioResult) -> Result<usize, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let rows = export_traces_csv(&dir.join(TRACE_FILE), &result.traces)?;
    export_cost_csv(&dir.join(COST_FILE), &result.cost)?;
    Ok(rows)
}

fn data_lines<'a>(path: &Path, text: &'a str, header: &str) -> Result<impl Iterator<Item = (usize, &'a str)>, HarnessError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, h)) if h.trim() == header => Ok(lines.filter(|(_, l)| !l.trim().is_empty())),
        _ => Err(csv_error(path, 1, format!("expected header `{header}`"))),
    }
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, raw: Option<&str>, name: &str) -> Result<T, HarnessError> {
    raw.and_then(|v| v.trim().parse().ok()).ok_or_else(|| csv_error(path, line, format!("bad {name}")))
}

/// Reads a trace file back; runs are not recorded and come back as 0.
pub fn read_traces_csv(path: &Path) -> Result<Vec<MseTrace>, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut traces: Vec<MseTrace> = Vec::new();
    for (line, row) in data_lines(path, &text, TRACE_HEADER)? {
        let mut cols = row.split(',');
        let algorithm = cols.next().unwrap_or_default().to_string();
        let iteration: usize = field(path, line, cols.next(), "iteration")?;
        let mse: f64 = field(path, line, cols.next(), "mse_db")?;
        let msd: f64 = field(path, line, cols.next(), "msd_db")?;
        if traces.last().is_none_or(|t| t.algorithm != algorithm) {
            traces.push(MseTrace { algorithm, mse_db: Vec::new(), msd_db: Vec::new(), runs: 0 });
        }
        let trace = traces.last_mut().expect("just pushed");
        if iteration != trace.mse_db.len() + 1 {
            return Err(csv_error(path, line, "iterations out of order"));
        }
        trace.mse_db.push(mse);
        trace.msd_db.push(msd);
    }
    Ok(traces)
}

pub fn read_cost_csv(path: &Path) -> Result<CostReport, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut entries = Vec::new();
    for (line, row) in data_lines(path, &text, COST_HEADER)? {
        let mut cols = row.split(',');
        let algorithm = cols.next().unwrap_or_default().to_string();
        let macs_per_node_iter = field(path, line, cols.next(), "macs_per_node_iter")?;
        let scalars_tx_per_node_iter = field(path, line, cols.next(), "scalars_tx_per_node_iter")?;
        entries.push(CostEntry { algorithm, macs_per_node_iter, scalars_tx_per_node_iter });
    }
    Ok(CostReport { entries })
}
