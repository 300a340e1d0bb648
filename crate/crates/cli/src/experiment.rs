//! End-to-end experiment driver: phantom, synthetic data, inversion, and
//! the artifact files of a run, plus the noise-level sweep.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lsr_core::inversion::{run_inversion, RunReport};

use crate::config::Config;
use crate::io::{write_field_csv, write_report_json, write_trace_csv, ReportDoc};
use crate::noise::{add_noise, NoiseSpec};
use crate::phantom::make_phantom;
use crate::Result;

/// Scalars summarizing a finished run, one row of the sweep table.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub delta_rel: f64,
    pub delta_abs: f64,
    pub alpha: f64,
    pub final_misfit: f64,
    pub l1_error_u: f64,
    pub iterations: usize,
    pub stop_reason: lsr_core::inversion::StopReason,
}

pub struct ExperimentOutcome {
    pub report: RunReport,
    pub summary: RunSummary,
    pub out_dir: PathBuf,
}

/// Write the ground-truth fields of a phantom without running anything.
pub fn emit_phantom(config: &Config, out_override: Option<&Path>) -> Result<PathBuf> {
    let grid = config.grid()?;
    let spec = config.phantom_spec()?;
    let (u_true, state) = make_phantom(&spec, grid, config.eps0(grid))?;
    let dir = out_dir(config, out_override)?;
    write_field_csv(&dir.join("u_true.csv"), &u_true)?;
    write_field_csv(&dir.join("phi_true.csv"), &state.phi)?;
    write_field_csv(&dir.join("psi1_true.csv"), &state.psi1)?;
    write_field_csv(&dir.join("psi2_true.csv"), &state.psi2)?;
    Ok(dir)
}

/// Solve the forward problem on the phantom and write the clean trace.
pub fn emit_forward(config: &Config, out_override: Option<&Path>) -> Result<PathBuf> {
    let grid = config.grid()?;
    let spec = config.phantom_spec()?;
    let (u_true, _) = make_phantom(&spec, grid, config.eps0(grid))?;
    let prob = config.build_problem(grid)?;
    let (y, _) = prob.forward(&u_true)?;
    let dir = out_dir(config, out_override)?;
    write_field_csv(&dir.join("u_true.csv"), &u_true)?;
    write_trace_csv(&dir.join("data_clean.csv"), &y)?;
    Ok(dir)
}

/// Full pipeline: phantom, forward data, noise, inversion, artifacts.
pub fn run_experiment(config: &Config, out_override: Option<&Path>) -> Result<ExperimentOutcome> {
    let grid = config.grid()?;
    let spec = config.phantom_spec()?;
    let (u_true, _) = make_phantom(&spec, grid, config.eps0(grid))?;
    let prob = config.build_problem(grid)?;
    let (y, _) = prob.forward(&u_true)?;
    let (data, delta_abs) = add_noise(
        &y,
        &NoiseSpec { delta_rel: config.noise.delta_rel, seed: config.noise.seed },
    )?;
    let prior = config.prior(grid)?;
    let inv = config.inversion_config(grid)?;

    let t0 = Instant::now();
    let report = run_inversion(&prob, &data, delta_abs, &prior, &inv, Some(&u_true))?;
    let wall = t0.elapsed().as_secs_f64();

    let dir = out_dir(config, out_override)?;
    write_field_csv(&dir.join("u_true.csv"), &u_true)?;
    write_field_csv(&dir.join("u_rec.csv"), &report.final_state.coefficient())?;
    write_field_csv(&dir.join("phi.csv"), &report.final_state.phi)?;
    write_field_csv(&dir.join("psi1.csv"), &report.final_state.psi1)?;
    write_field_csv(&dir.join("psi2.csv"), &report.final_state.psi2)?;
    write_trace_csv(&dir.join("data.csv"), &data)?;

    let doc = ReportDoc {
        config,
        alpha: report.alpha,
        delta_abs,
        iterations: report.iterations(),
        stop_reason: report.stop_reason,
        abort_error: report.error.as_ref().map(|e| e.to_string()),
        records: &report.records,
        wall_time_seconds: wall,
    };
    write_report_json(&dir.join("report.json"), &doc)?;

    let last = report.final_record();
    let summary = RunSummary {
        delta_rel: config.noise.delta_rel,
        delta_abs,
        alpha: report.alpha,
        final_misfit: last.residual_norm,
        l1_error_u: last.error_l1.unwrap_or(f64::NAN),
        iterations: report.iterations(),
        stop_reason: report.stop_reason,
    };
    Ok(ExperimentOutcome { report, summary, out_dir: dir })
}

/// Run one experiment per noise level (descending) into per-level
/// subdirectories and write the summary table. Individual failures are
/// reported and skipped; the sweep continues.
pub fn sweep_noise(
    config: &Config,
    deltas: &[f64],
    out_override: Option<&Path>,
) -> Result<Vec<std::result::Result<RunSummary, String>>> {
    let base = out_dir(config, out_override)?;
    let mut rows = Vec::new();
    for &delta in deltas {
        let mut cfg = config.clone();
        cfg.noise.delta_rel = delta;
        let sub = base.join(format!("delta_{delta:.4}"));
        match run_experiment(&cfg, Some(&sub)) {
            Ok(outcome) => rows.push(Ok(outcome.summary)),
            Err(e) => rows.push(Err(format!("delta {delta}: {e}"))),
        }
    }
    let mut table = String::from("delta,alpha,final_misfit,l1_error_u,iterations\n");
    for row in rows.iter().flatten() {
        table.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            row.delta_rel, row.alpha, row.final_misfit, row.l1_error_u, row.iterations
        ));
    }
    fs::write(base.join("sweep.csv"), table)?;
    Ok(rows)
}

fn out_dir(config: &Config, out_override: Option<&Path>) -> Result<PathBuf> {
    let dir = out_override.map(Path::to_path_buf).unwrap_or_else(|| config.out.dir.clone().into());
    fs::create_dir_all(&dir)?;
    Ok(dir)
}
