//! Runs experiments end to end and writes their output files:
//!
//! - `diagnostics.csv`: one row per record time
//! - `snapshot_tXXXX.XXXX.csv`: profile snapshots
//! - `decay.dat`: whitespace table of the decaying quantities for gnuplot
//! - `report.json`: limit analysis, only for completed runs
//! - `ambient.json`: curvature checks, when `verify.ambient_samples > 0`

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{error, info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::ambient::verify_ambient;
use crate::config::{parse_config_unchecked, ExperimentConfig};
use crate::error::{Error, Result};
use crate::geometry::RadialProfile;
use crate::flow::{run_flow, write_diagnostics_csv, write_snapshot_csv, DiagnosticsRecord, FlowState, Schedule, StepControl};
use crate::limit::{constancy_verdict, extract_conformal_factor, fit_decay_rate, DecayRates, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_MEAN_CONVEXITY: i32 = 2;
pub const EXIT_STIFF: i32 = 3;

/// Rate fits start here, past the initial layer.
pub const FIT_T_MIN: f64 = 10.0;

/// Seed of the ambient curvature sampling, fixed so reruns are identical.
pub const AMBIENT_SEED: u64 = 0x5eed_a4b1;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::MeanConvexityLost { .. } => EXIT_MEAN_CONVEXITY,
        Error::Stiffness { .. } => EXIT_STIFF,
        _ => EXIT_CONFIG,
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub error: Option<Error>,
    pub report: Option<Report>,
    pub records: Vec<DiagnosticsRecord>,
    /// Minimum of H over the accepted states (NaN if the run never started).
    pub min_h: f64,
}

impl RunOutcome {
    fn failed(e: Error, records: Vec<DiagnosticsRecord>, min_h: f64) -> Self {
        Self { exit_code: exit_code(&e), error: Some(e), report: None, records, min_h }
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

pub fn snapshot_file_name(t: f64) -> String {
    format!("snapshot_t{t:09.4}.csv")
}

/// max |H - (4n+2)| from a record.
pub fn h_deviation(n: usize, r: &DiagnosticsRecord) -> f64 {
    let target = 4.0 * n as f64 + 2.0;
    (r.h_max - target).abs().max((r.h_min - target).abs())
}

fn write_decay_table(path: &Path, n: usize, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "# t sup_grad_phi_sq H_deviation q_rhs")?;
    for r in records {
        writeln!(out, "{} {} {} {}", r.t, r.sup_grad_phi_sq, h_deviation(n, r), r.q_rhs)?;
    }
    out.flush()?;
    Ok(())
}

fn decay_rates(n: usize, records: &[DiagnosticsRecord]) -> DecayRates {
    let fit = |f: &dyn Fn(&DiagnosticsRecord) -> f64| {
        let series: Vec<(f64, f64)> = records.iter().filter(|r| r.t >= FIT_T_MIN).map(|r| (r.t, f(r))).collect();
        fit_decay_rate(&series, FIT_T_MIN).ok().map(|fit| fit.rate)
    };
    DecayRates { grad_phi: fit(&|r| r.sup_grad_phi_sq), h: fit(&|r| h_deviation(n, r)) }
}

/// Runs one experiment into `cfg.out_dir`. Refused and failed runs never write `report.json`.
pub fn run_experiment(cfg: &ExperimentConfig) -> RunOutcome {
    let profile = match cfg.checked_initial_profile() {
        Ok(p) => p,
        Err(e) => {
            error!("refusing to start: {e}");
            return RunOutcome::failed(e, Vec::new(), f64::NAN);
        }
    };
    match execute(cfg, profile) {
        Ok(outcome) => outcome,
        Err(e) => {
            error!("{e}");
            RunOutcome::failed(e, Vec::new(), f64::NAN)
        }
    }
}

fn execute(cfg: &ExperimentConfig, profile: RadialProfile) -> Result<RunOutcome> {
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir)?;

    if cfg.ambient_samples > 0 {
        let rep = verify_ambient(cfg.n, cfg.ambient_samples, AMBIENT_SEED)?;
        if !rep.passes() {
            warn!("ambient curvature checks exceed tolerance: {rep:?}");
        }
        write_atomic(&dir.join("ambient.json"), serde_json::to_string_pretty(&rep).map_err(json_err)?.as_bytes())?;
    }

    let ctrl = StepControl { cfl_safety: cfg.cfl_safety, dt_max: cfg.dt_max, t_end: cfg.t_end };
    let schedule = Schedule { record_every: cfg.diagnostics_every, snapshot_every: Some(cfg.snapshot_every) };
    info!("n = {}, N = {}, t_end = {}, output {}", cfg.n, cfg.points, cfg.t_end, dir.display());
    let (run, failure) = match run_flow(FlowState::new(profile), &ctrl, &schedule) {
        Ok(run) => (run, None),
        Err(abort) => (abort.partial, Some(abort.error)),
    };

    let mut out = create(&dir.join("diagnostics.csv"))?;
    write_diagnostics_csv(&mut out, &run.records)?;
    out.flush()?;
    for (t, p) in &run.snapshots {
        let mut out = create(&dir.join(snapshot_file_name(*t)))?;
        write_snapshot_csv(&mut out, p)?;
        out.flush()?;
    }
    write_decay_table(&dir.join("decay.dat"), cfg.n, &run.records)?;

    if let Some(e) = failure {
        error!("flow stopped after {} steps: {e}", run.final_state.step_count);
        return Ok(RunOutcome::failed(e, run.records, run.min_h));
    }

    let cf = extract_conformal_factor(&run.snapshots)?;
    let verdict = constancy_verdict(&cf, cfg.limit_tol)?;
    let q_final = run.records.last().map_or(f64::NAN, |r| r.q);
    let report = Report {
        n: cfg.n,
        grid_size: cfg.points,
        t_end: cfg.t_end,
        f_range: verdict.f_range,
        limit_q: verdict.limit_q,
        q_final,
        verdict: verdict.verdict,
        decay_rates: decay_rates(cfg.n, &run.records),
        cauchy_residual: cf.cauchy_residual,
    };
    write_atomic(&dir.join("report.json"), serde_json::to_string_pretty(&report).map_err(json_err)?.as_bytes())?;
    info!(
        "verdict {} (f range {:.3e}, limit Q {:.6}, Q final {:.6}, certified {})",
        verdict.verdict, verdict.f_range, verdict.limit_q, q_final, verdict.certified_non_constant
    );
    Ok(RunOutcome { exit_code: EXIT_OK, error: None, report: Some(report), records: run.records, min_h: run.min_h })
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Io(e.to_string())
}

/// One row of the sweep summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub cell: usize,
    pub overrides: Vec<(String, String)>,
    pub tau: f64,
    pub amplitude: f64,
    pub q_final: Option<f64>,
    pub limit_q: Option<f64>,
    /// CONSTANT / NON_CONSTANT, or REFUSED, MEAN_CONVEXITY_LOST, STIFF, ERROR for failed cells.
    pub verdict: String,
    pub min_h_over_run: f64,
}

pub const SWEEP_HEADER: &str = "tau,amplitude,Q_final,limit_Q,verdict,min_H_over_run";

impl SweepRow {
    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
        format!(
            "{},{},{},{},{},{}",
            self.tau,
            self.amplitude,
            opt(self.q_final),
            opt(self.limit_q),
            self.verdict,
            self.min_h_over_run
        )
    }
}

/// Cartesian product of the varied values, first key slowest.
pub fn sweep_cells(vary: &[(String, Vec<String>)]) -> Vec<Vec<(String, String)>> {
    vary.iter().fold(vec![Vec::new()], |cells, (key, values)| {
        cells
            .iter()
            .flat_map(|cell| {
                values.iter().map(move |v| {
                    let mut c = cell.clone();
                    c.push((key.clone(), v.clone()));
                    c
                })
            })
            .collect()
    })
}

fn failure_label(e: &Error) -> &'static str {
    match e {
        Error::NotMeanConvex { .. } => "REFUSED",
        Error::MeanConvexityLost { .. } => "MEAN_CONVEXITY_LOST",
        Error::Stiffness { .. } => "STIFF",
        _ => "ERROR",
    }
}

/// Runs every cell concurrently, each into `out_dir/cell_XXX`, then writes
/// `out_dir/sweep.csv`. A failing cell is recorded and does not stop the others.
pub fn sweep(config_text: &str, vary: &[(String, Vec<String>)], out_dir: Option<&Path>) -> Result<Vec<SweepRow>> {
    let base = parse_config_unchecked(config_text, &[])?;
    let root: PathBuf = out_dir.map_or_else(|| base.out_dir.clone(), Path::to_path_buf);
    fs::create_dir_all(&root)?;
    let cells = sweep_cells(vary);
    let rows: Vec<SweepRow> = cells
        .into_par_iter()
        .enumerate()
        .map(|(idx, overrides)| {
            let mut row = SweepRow {
                cell: idx,
                overrides: overrides.clone(),
                tau: f64::NAN,
                amplitude: f64::NAN,
                q_final: None,
                limit_q: None,
                verdict: String::new(),
                min_h_over_run: f64::NAN,
            };
            let mut cfg = match parse_config_unchecked(config_text, &overrides) {
                Ok(c) => c,
                Err(e) => {
                    error!("cell {idx} {overrides:?}: {e}");
                    row.verdict = failure_label(&e).to_string();
                    return row;
                }
            };
            cfg.out_dir = root.join(format!("cell_{idx:03}"));
            row.tau = cfg.base_radius();
            row.amplitude = cfg.amplitude;
            let outcome = run_experiment(&cfg);
            row.min_h_over_run = outcome.min_h;
            match (&outcome.report, &outcome.error) {
                (Some(rep), _) => {
                    row.q_final = Some(rep.q_final);
                    row.limit_q = Some(rep.limit_q);
                    row.verdict = rep.verdict.to_string();
                }
                (None, Some(e)) => row.verdict = failure_label(e).to_string(),
                (None, None) => row.verdict = "ERROR".to_string(),
            }
            row
        })
        .collect();

    let mut out = create(&root.join("sweep.csv"))?;
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in &rows {
        writeln!(out, "{}", r.csv_row())?;
    }
    out.flush()?;
    Ok(rows)
}

/// Parses `KEY=V1,V2,...`.
pub fn parse_vary(arg: &str) -> Result<(String, Vec<String>)> {
    let (key, values) = arg
        .split_once('=')
        .ok_or_else(|| Error::InvalidArgument(format!("--vary expects KEY=V1,V2,..., got `{arg}`")))?;
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
    if key.trim().is_empty() || values.is_empty() {
        return Err(Error::InvalidArgument(format!("--vary expects KEY=V1,V2,..., got `{arg}`")));
    }
    Ok((key.trim().to_string(), values))
}
