//! Moduli energy `F(A) = ½∫|∇A|²`, its L² gradient, and per-step diagnostics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::FlowState;
use crate::tensor_field::SymTensorField;

/// `F(A) = ½ ∫ Σᵢ |∂ᵢA|²_F dμ`, evaluated exactly on the trigonometric interpolant.
pub fn moduli_energy(a: &SymTensorField) -> f64 {
    0.5 * a.dirichlet_integral()
}

/// L² gradient of `F`: `−ΔA` (symbol `+|k|²`).
pub fn energy_gradient(a: &SymTensorField) -> Result<SymTensorField> {
    a.laplacian()?.scale(-1.0)
}

/// Outcome of a central-difference check of the first variation of `F`.
#[derive(Debug, Clone, Serialize)]
pub struct GradientCheck {
    pub eps: Vec<f64>,
    /// `⟨grad F(A), B⟩_{L²}`.
    pub analytic: f64,
    pub finite_difference: Vec<f64>,
    pub relative_errors: Vec<f64>,
    /// Least-squares slope of `log err` against `log ε`; `None` when roundoff dominates.
    pub fitted_order: Option<f64>,
    /// Every error sits at the roundoff floor (expected: `F` is quadratic).
    pub roundoff_dominated: bool,
}

/// Relative errors below this are indistinguishable from roundoff in the difference quotient.
const ROUNDOFF_FLOOR: f64 = 1e-9;

pub fn gradient_fd_check(a: &SymTensorField, b: &SymTensorField, eps: &[f64]) -> Result<GradientCheck> {
    if eps.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 step sizes, got {}", eps.len())));
    }
    if eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::InvalidArgument("step sizes must be positive".into()));
    }
    if b.l2_norm() == 0.0 {
        return Err(Error::DegenerateDirection);
    }

    let analytic = energy_gradient(a)?.inner(b)?;
    let scale = analytic.abs().max(f64::MIN_POSITIVE);
    let mut finite_difference = Vec::with_capacity(eps.len());
    let mut relative_errors = Vec::with_capacity(eps.len());
    for &e in eps {
        let plus = moduli_energy(&a.axpy(e, b)?);
        let minus = moduli_energy(&a.axpy(-e, b)?);
        let fd = (plus - minus) / (2.0 * e);
        finite_difference.push(fd);
        relative_errors.push((fd - analytic).abs() / scale);
    }

    let roundoff_dominated = relative_errors.iter().all(|&r| r <= ROUNDOFF_FLOOR);
    let fitted_order = if roundoff_dominated {
        None
    } else {
        let pts: Vec<(f64, f64)> = eps
            .iter()
            .zip(&relative_errors)
            .filter(|(_, r)| **r > 0.0)
            .map(|(e, r)| (e.ln(), r.ln()))
            .collect();
        least_squares_slope(&pts)
    };

    Ok(GradientCheck {
        eps: eps.to_vec(),
        analytic,
        finite_difference,
        relative_errors,
        fitted_order,
        roundoff_dominated,
    })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// One row of the time series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    #[serde(rename = "F")]
    pub energy: f64,
    #[serde(rename = "W")]
    pub entropy: Option<f64>,
    pub grad_a_l2: f64,
    pub lap_a_l2: f64,
    pub a_l2: f64,
    pub a_sup: f64,
    pub mean_trace: f64,
    pub eig_min: f64,
    pub eig_max: f64,
    pub dt_last: f64,
}

pub fn diagnostics(state: &FlowState) -> Result<DiagnosticsRecord> {
    let a = &state.a;
    let grid = a.grid();
    let eig = a.eigenvalue_fields();
    let eig_min = eig[0].iter().copied().fold(f64::INFINITY, f64::min);
    let eig_max = eig[eig.len() - 1].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let record = DiagnosticsRecord {
        t: state.t,
        energy: moduli_energy(a),
        entropy: None,
        grad_a_l2: a.gradient_l2_norm(),
        lap_a_l2: a.laplacian()?.l2_norm(),
        a_l2: a.l2_norm(),
        a_sup: a.sup_norm(),
        mean_trace: grid.mean(&a.trace())?,
        eig_min,
        eig_max,
        dt_last: state.dt_last,
    };
    let values = [
        record.t,
        record.energy,
        record.grad_a_l2,
        record.lap_a_l2,
        record.a_l2,
        record.a_sup,
        record.mean_trace,
        record.eig_min,
        record.eig_max,
        record.dt_last,
    ];
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("diagnostics"));
    }
    Ok(record)
}
