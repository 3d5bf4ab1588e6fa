//! Orchestration of the five experiment kinds and their on-disk artifacts.

use std::path::{Path, PathBuf};

use mflow_core::entropy::monitor_entropy;
use mflow_core::flow::{drive, FlowDriver, FlowRun};
use mflow_core::functionals::gradient_fd_check;
use mflow_core::stability::perturbation_run;
use mflow_core::willmore::{compare_profiles, scalar_baseline_step, willmore_energy};
use mflow_core::{init, DiagnosticsRecord, Error, FlowState, Grid, SymMatrix, SymTensorField};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, InitialSpec, Kind};
use crate::output::{checkpoint_read, checkpoint_write, fmt_f64, write_timeseries, OutputError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error(transparent)]
    Output(#[from] OutputError),
}

impl RunError {
    /// 1 validation, 2 runtime, 3 blow-up.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Usage(_) => 1,
            Self::Core(e) | Self::Output(OutputError::Core(e)) => core_exit_code(e),
            Self::Output(OutputError::Version(_) | OutputError::Malformed { .. }) => 1,
            Self::Output(_) => 2,
        }
    }

    fn category(&self) -> &'static str {
        match self.exit_code() {
            1 => "validation",
            3 => "blow_up",
            _ => "runtime",
        }
    }

    /// Machine-readable error report for stderr.
    pub fn to_json(&self) -> String {
        let mut v = json!({
            "error": self.category(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let Self::Core(Error::BlowUp { t, dt, .. }) = self {
            v["t"] = json!(t);
            v["dt"] = json!(dt);
        }
        v.to_string()
    }
}

fn core_exit_code(e: &Error) -> i32 {
    match e {
        Error::BlowUp { .. } => 3,
        Error::InvalidGrid(_)
        | Error::ShapeMismatch { .. }
        | Error::GridMismatch
        | Error::NotOrthogonal(_)
        | Error::InvalidPower(_)
        | Error::PositiveCurvature(_)
        | Error::InvalidSchedule(_)
        | Error::InvalidEta(_)
        | Error::EntropyHorizon { .. }
        | Error::CflViolation { .. }
        | Error::InvalidArgument(_) => 1,
        _ => 2,
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Write the final state (flow runs only).
    pub checkpoint: Option<PathBuf>,
    /// Start from a checkpoint instead of the configured initial data (flow runs only).
    pub resume: Option<PathBuf>,
}

/// Files written by a run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub timeseries: Option<PathBuf>,
    pub summary: PathBuf,
    pub extra: Vec<PathBuf>,
}

pub fn build_initial(spec: &InitialSpec, grid: &Grid, seed: u64) -> Result<SymTensorField, Error> {
    match spec {
        InitialSpec::Zero => Ok(SymTensorField::zeros(grid)),
        InitialSpec::SingleMode { k, component, amplitude } => init::single_mode(grid, *k, *component, *amplitude),
        InitialSpec::RandomSmooth { cutoff, amplitude } => init::random_smooth(grid, seed, *cutoff, *amplitude),
        InitialSpec::Constant { entries } => init::constant(grid, entries),
    }
}

fn record_json(r: &DiagnosticsRecord) -> Value {
    serde_json::to_value(r).expect("diagnostics serialize")
}

fn base_summary(cfg: &ExperimentConfig) -> Value {
    json!({
        "kind": cfg.kind.name(),
        "seed": cfg.seed,
        "grid": { "m": cfg.dim, "n": cfg.n, "L": cfg.period },
        "ambient": { "c": cfg.ambient.curvature(), "trace_adjusted": cfg.ambient.trace_adjusted() },
        "theta": cfg.coeffs.theta,
    })
}

fn flow_summary(summary: &mut Value, run: &FlowRun) {
    let increase = run.records.windows(2).map(|w| w[1].energy - w[0].energy).fold(f64::NEG_INFINITY, f64::max);
    let late = run.rejections.iter().filter(|r| r.after_step >= 5).count();
    summary["t_final"] = json!(run.final_state.t);
    summary["steps"] = json!(run.final_state.step);
    summary["rejections"] = json!(run.rejections.len());
    summary["late_rejections"] = json!(late);
    summary["energy_monotone"] = json!(run.records.len() < 2 || increase <= 0.0);
    summary["max_energy_increase"] = json!(if run.records.len() < 2 { 0.0 } else { increase });
    summary["final"] = record_json(run.records.last().expect("initial record always present"));
}

fn write_file(path: &Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text).map_err(|e| RunError::Output(e.into()))
}

fn flow_run(cfg: &ExperimentConfig, grid: &Grid, opts: &RunOptions) -> Result<FlowRun, RunError> {
    let driver = match &opts.resume {
        Some(path) => {
            let (state, controller) = checkpoint_read(path)?;
            if state.a.grid() != grid {
                return Err(RunError::Usage(format!("checkpoint {} was written on a different grid", path.display())));
            }
            if state.t >= cfg.schedule.t_end {
                return Err(RunError::Usage(format!("checkpoint time {} is already at or past t_end", state.t)));
            }
            FlowDriver::resume(state, controller, cfg.ambient, cfg.coeffs, cfg.schedule)?
        }
        None => {
            let a0 = build_initial(&cfg.initial, grid, cfg.seed)?;
            FlowDriver::new(FlowState::new(a0), cfg.ambient, cfg.coeffs, cfg.schedule)?
        }
    };
    match drive(driver) {
        Err(Error::BlowUp { t, dt, last_good }) => {
            let ctl = mflow_core::flow::Controller { dt_next: dt, accept_streak: 0, energy_ref: 0.0 };
            let _ = checkpoint_write(&cfg.out_dir.join("last_good.mflow"), &last_good, &ctl);
            Err(Error::BlowUp { t, dt, last_good }.into())
        }
        other => Ok(other?),
    }
}

/// Baseline trajectory sampled at the given times.
fn baseline_profile(a0: &SymTensorField, times: &[f64], dt: f64, sigma: f64) -> Result<Vec<f64>, Error> {
    let mut a = a0.clone();
    let mut out = Vec::with_capacity(times.len());
    let mut t = times.first().copied().unwrap_or(0.0);
    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let substeps = (span / dt).ceil().max(1.0) as usize;
            let h = span / substeps as f64;
            for _ in 0..substeps {
                a = scalar_baseline_step(&a, h, sigma)?;
            }
        }
        t = target;
        out.push(willmore_energy(&a));
    }
    Ok(out)
}

/// Run one experiment and write its artifacts into `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunArtifacts, RunError> {
    if cfg.kind != Kind::Flow && (opts.checkpoint.is_some() || opts.resume.is_some()) {
        return Err(RunError::Usage("checkpoint and resume are supported for flow runs only".into()));
    }
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| RunError::Output(e.into()))?;
    let grid = Grid::new(cfg.dim, cfg.n, cfg.period)?;
    let mut summary = base_summary(cfg);
    let mut records: Option<Vec<DiagnosticsRecord>> = None;
    let mut extra = Vec::new();

    match cfg.kind {
        Kind::Flow => {
            let run = flow_run(cfg, &grid, opts)?;
            flow_summary(&mut summary, &run);
            if let Some(path) = &opts.checkpoint {
                checkpoint_write(path, &run.final_state, &run.controller)?;
                extra.push(path.clone());
            }
            records = Some(run.snapshot_records().into_iter().cloned().collect());
        }
        Kind::Entropy => {
            let run = flow_run(cfg, &grid, opts)?;
            flow_summary(&mut summary, &run);
            let mon = monitor_entropy(&run.snapshots, cfg.entropy.horizon, cfg.entropy.sign, cfg.entropy.tol)?;
            let mut rows: Vec<DiagnosticsRecord> = run.snapshot_records().into_iter().cloned().collect();
            for (row, (_, w)) in rows.iter_mut().zip(&mon.series) {
                row.entropy = Some(*w);
            }
            summary["final"]["W"] = json!(mon.series.last().map(|s| s.1));
            summary["entropy"] = json!({
                "T": cfg.entropy.horizon,
                "adjoint_sign": cfg.entropy.sign,
                "tol": cfg.entropy.tol,
                "monotone": mon.monotone,
                "max_increase": mon.max_increase,
                "max_normalization_error": mon.max_norm_error,
                "total_shift": mon.shifts.iter().sum::<f64>(),
            });
            records = Some(rows);
        }
        Kind::Stability => {
            let st = &cfg.stability;
            let background = SymMatrix::from_entries(cfg.dim, &st.background)?;
            let p0 = init::single_mode(&grid, st.mode, st.component, 1.0)?;
            let (report, run) = perturbation_run(&background, &p0, st.amplitude, &cfg.ambient, &cfg.coeffs, &cfg.schedule)?;
            flow_summary(&mut summary, &run);
            summary["decay"] = serde_json::to_value(&report).expect("report serializes");
            records = Some(run.snapshot_records().into_iter().cloned().collect());
        }
        Kind::Gradcheck => {
            let a = build_initial(&cfg.initial, &grid, cfg.seed)?;
            let cutoff = 4.min(cfg.n as u32 / 2 - 1);
            let b = init::random_smooth(&grid, cfg.seed.wrapping_add(1), cutoff, 1.0)?;
            let check = gradient_fd_check(&a, &b, &cfg.eps)?;
            summary["gradcheck"] = serde_json::to_value(&check).expect("check serializes");
        }
        Kind::WillmoreCompare => {
            let run = flow_run(cfg, &grid, opts)?;
            flow_summary(&mut summary, &run);
            let cmp = compare_profiles(&run.snapshots)?;
            let times: Vec<f64> = cmp.rows.iter().map(|r| r.t).collect();
            let baseline = baseline_profile(&run.snapshots[0].a, &times, cfg.baseline_dt, cfg.sigma)?;
            let mut csv = String::from("t,F,willmore,baseline_willmore\n");
            for (row, b) in cmp.rows.iter().zip(&baseline) {
                csv.push_str(&format!("{},{},{},{}\n", fmt_f64(row.t), fmt_f64(row.energy), fmt_f64(row.willmore), fmt_f64(*b)));
            }
            let path = cfg.out_dir.join("profiles.csv");
            write_file(&path, &csv)?;
            extra.push(path);
            summary["willmore"] = json!({
                "sigma": cfg.sigma,
                "baseline_dt": cfg.baseline_dt,
                "energy_decreased": cmp.energy_decreased,
                "willmore_decreased": cmp.willmore_decreased,
                "willmore_initial": cmp.rows.first().map(|r| r.willmore),
                "willmore_final": cmp.rows.last().map(|r| r.willmore),
                "baseline_willmore_final": baseline.last(),
            });
            records = Some(run.snapshot_records().into_iter().cloned().collect());
        }
    }

    let timeseries = match records {
        Some(rows) => {
            let path = cfg.out_dir.join("timeseries.csv");
            write_file(&path, &write_timeseries(&rows)?)?;
            Some(path)
        }
        None => None,
    };
    let summary_path = cfg.out_dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    write_file(&summary_path, &text)?;
    Ok(RunArtifacts { timeseries, summary: summary_path, extra })
}
