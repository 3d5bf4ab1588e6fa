//! Time-series CSV and the `MFLOW1` checkpoint format.
//!
//! Floats are written in shortest round-trip exponent form, so reading a
//! checkpoint back reproduces every sample bit for bit.
//!
//! Checkpoint layout:
//!
//! ```text
//! MFLOW1 <m> <n> <L> <t> <step>
//! controller <dt_last> <dt_next> <accept_streak> <energy_ref>
//! <component 0, sample 0>
//! ...                       one value per line, row-major samples,
//! <component d-1, sample N-1>  components ordered a11 [, a12, a22]
//! ```

use std::fmt::Write as _;
use std::path::Path;

use mflow_core::flow::Controller;
use mflow_core::{DiagnosticsRecord, FlowState, Grid, SymTensorField};
use thiserror::Error;

pub const CSV_HEADER: &str = "t,F,W,grad_A_l2,lap_A_l2,A_l2,A_sup,mean_trace,eig_min,eig_max,dt";
pub const CHECKPOINT_TAG: &str = "MFLOW1";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("no records to write")]
    Empty,
    #[error("checkpoint version mismatch: expected {CHECKPOINT_TAG}, found `{0}`")]
    Version(String),
    #[error("malformed checkpoint at line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] mflow_core::Error),
}

/// Shortest round-trip decimal.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

pub fn write_timeseries(records: &[DiagnosticsRecord]) -> Result<String, OutputError> {
    if records.is_empty() {
        return Err(OutputError::Empty);
    }
    let mut out = String::with_capacity(128 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let w = r.entropy.map(fmt_f64).unwrap_or_default();
        let cols = [
            fmt_f64(r.t),
            fmt_f64(r.energy),
            w,
            fmt_f64(r.grad_a_l2),
            fmt_f64(r.lap_a_l2),
            fmt_f64(r.a_l2),
            fmt_f64(r.a_sup),
            fmt_f64(r.mean_trace),
            fmt_f64(r.eig_min),
            fmt_f64(r.eig_max),
            fmt_f64(r.dt_last),
        ];
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn checkpoint_to_string(state: &FlowState, controller: &Controller) -> String {
    let grid = state.a.grid();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{CHECKPOINT_TAG} {} {} {} {} {}",
        grid.dim(),
        grid.n(),
        fmt_f64(grid.period()),
        fmt_f64(state.t),
        state.step
    );
    let _ = writeln!(
        out,
        "controller {} {} {} {}",
        fmt_f64(state.dt_last),
        fmt_f64(controller.dt_next),
        controller.accept_streak,
        fmt_f64(controller.energy_ref)
    );
    for comp in state.a.components() {
        for v in comp {
            out.push_str(&fmt_f64(*v));
            out.push('\n');
        }
    }
    out
}

pub fn checkpoint_write(path: &Path, state: &FlowState, controller: &Controller) -> Result<(), OutputError> {
    std::fs::write(path, checkpoint_to_string(state, controller))?;
    Ok(())
}

fn field<T: std::str::FromStr>(parts: &[&str], i: usize, line: usize, what: &str) -> Result<T, OutputError> {
    parts
        .get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| OutputError::Malformed { line, message: format!("bad or missing {what}") })
}

pub fn checkpoint_from_str(text: &str) -> Result<(FlowState, Controller), OutputError> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
    let tag = header.first().copied().unwrap_or("");
    if tag != CHECKPOINT_TAG {
        return Err(OutputError::Version(tag.to_string()));
    }
    if header.len() != 6 {
        return Err(OutputError::Malformed { line: 1, message: "expected `MFLOW1 m n L t step`".into() });
    }
    let dim: usize = field(&header, 1, 1, "m")?;
    let n: usize = field(&header, 2, 1, "n")?;
    let period: f64 = field(&header, 3, 1, "L")?;
    let t: f64 = field(&header, 4, 1, "t")?;
    let step: u64 = field(&header, 5, 1, "step")?;

    let ctl: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
    if ctl.first() != Some(&"controller") || ctl.len() != 5 {
        return Err(OutputError::Malformed { line: 2, message: "expected controller line".into() });
    }
    let dt_last: f64 = field(&ctl, 1, 2, "dt_last")?;
    let controller = Controller {
        dt_next: field(&ctl, 2, 2, "dt_next")?,
        accept_streak: field(&ctl, 3, 2, "accept_streak")?,
        energy_ref: field(&ctl, 4, 2, "energy_ref")?,
    };

    let grid = Grid::new(dim, n, period)?;
    let d = if dim == 1 { 1 } else { 3 };
    let mut comps = Vec::with_capacity(d);
    let mut line = 2;
    for _ in 0..d {
        let mut comp = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            line += 1;
            let v = lines
                .next()
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| OutputError::Malformed { line, message: "bad or missing sample".into() })?;
            comp.push(v);
        }
        comps.push(comp);
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(OutputError::Malformed { line: line + 1, message: "trailing data".into() });
    }
    let a = SymTensorField::from_components(&grid, comps)?;
    Ok((FlowState { a, t, step, dt_last }, controller))
}

pub fn checkpoint_read(path: &Path) -> Result<(FlowState, Controller), OutputError> {
    checkpoint_from_str(&std::fs::read_to_string(path)?)
}
