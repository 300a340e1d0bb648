//! CSV field/trace dumps (17 significant digits, row-major) and the JSON
//! run report.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use lsr_core::grid::{BoundaryTrace, Grid2D, ScalarField};
use lsr_core::inversion::{IterationRecord, StopReason};

use crate::config::Config;
use crate::{CliError, Result};

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a field as `x,y,value` rows in row-major node order.
pub fn write_field_csv(path: &Path, field: &ScalarField) -> Result<()> {
    let g = field.grid();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "x,y,value")?;
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            writeln!(w, "{},{},{}", fmt(g.x(i)), fmt(g.y(j)), fmt(field.get(i, j)))?;
        }
    }
    Ok(())
}

/// Read a field written by [`write_field_csv`] back onto its grid.
pub fn read_field_csv(path: &Path, grid: Grid2D) -> Result<ScalarField> {
    let reader = BufReader::new(File::open(path)?);
    let mut values = Vec::with_capacity(grid.n_nodes());
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if n == 0 {
            continue;
        }
        let value = line
            .rsplit(',')
            .next()
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| CliError::Config(format!("{}: bad row {}", path.display(), n + 1)))?;
        values.push(value);
    }
    Ok(ScalarField::from_values(grid, values)?)
}

/// Write a boundary trace as `s,value` rows, `s` the arc length from the
/// lower-left corner, counter-clockwise.
pub fn write_trace_csv(path: &Path, trace: &BoundaryTrace) -> Result<()> {
    let g = trace.grid();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "s,value")?;
    let mut s = 0.0;
    let mut prev: Option<(usize, usize)> = None;
    for (k, (i, j)) in g.boundary_nodes().enumerate() {
        if let Some((pi, pj)) = prev {
            s += (g.x(i) - g.x(pi)).hypot(g.y(j) - g.y(pj));
        }
        prev = Some((i, j));
        writeln!(w, "{},{}", fmt(s), fmt(trace.values()[k]))?;
    }
    Ok(())
}

/// Read a trace written by [`write_trace_csv`].
pub fn read_trace_csv(path: &Path, grid: Grid2D) -> Result<BoundaryTrace> {
    let reader = BufReader::new(File::open(path)?);
    let mut values = Vec::with_capacity(grid.n_boundary());
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if n == 0 {
            continue;
        }
        let value = line
            .rsplit(',')
            .next()
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| CliError::Config(format!("{}: bad row {}", path.display(), n + 1)))?;
        values.push(value);
    }
    Ok(BoundaryTrace::from_values(grid, values)?)
}

/// The serialized run report: config echo, scalars and the full history.
#[derive(Debug, Serialize)]
pub struct ReportDoc<'a> {
    pub config: &'a Config,
    pub alpha: f64,
    pub delta_abs: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abort_error: Option<String>,
    pub records: &'a [IterationRecord],
    pub wall_time_seconds: f64,
}

pub fn write_report_json(path: &Path, doc: &ReportDoc<'_>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, doc)?;
    w.write_all(b"\n")?;
    Ok(())
}
