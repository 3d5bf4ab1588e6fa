//! Willmore-type baseline: `∫(tr A)²` and its scalar-level gradient flow
//! `∂ₜA = −2 tr(A) Id + σΔA`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::FlowState;
use crate::functionals::moduli_energy;
use crate::tensor_field::SymTensorField;

/// `∫ (tr A)² dμ`.
pub fn willmore_energy(a: &SymTensorField) -> f64 {
    let tr = a.trace();
    let sq: Vec<f64> = tr.iter().map(|v| v * v).collect();
    a.grid().integrate(&sq).expect("trace lives on the field's grid")
}

/// One step of the baseline flow.
///
/// The pointwise trace ODE `∂ₜ tr A = −2m tr A` is solved exactly, so with
/// `σ = 0` the trace follows `e^{−2mt}` to roundoff. The `σΔA` sector is
/// explicit Euler and must satisfy `dt ≤ 0.2h²/σ`.
pub fn scalar_baseline_step(a: &SymTensorField, dt: f64, sigma: f64) -> Result<SymTensorField> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("diffusive weight must be >= 0, got {sigma}")));
    }
    let grid = a.grid();
    if sigma > 0.0 {
        let limit = 0.2 * grid.spacing().powi(2) / sigma;
        if dt > limit {
            return Err(Error::CflViolation { dt, limit });
        }
    }
    let m = a.dim() as f64;
    // A − (tr A/m)(1 − e^{−2m dt}) Id
    let loss = -(-2.0 * m * dt).exp_m1() / m;
    let shift: Vec<f64> = a.trace().iter().map(|t| -t * loss).collect();
    let mut next = a.add(&SymTensorField::identity_scale(grid, &shift)?)?;
    if sigma > 0.0 {
        next = next.axpy(sigma * dt, &a.laplacian()?)?;
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub t: f64,
    #[serde(rename = "F")]
    pub energy: f64,
    pub willmore: f64,
}

/// Side-by-side energy profiles along a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileComparison {
    pub rows: Vec<ProfileRow>,
    pub energy_decreased: bool,
    pub willmore_decreased: bool,
}

pub fn compare_profiles(trajectory: &[FlowState]) -> Result<ProfileComparison> {
    if trajectory.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let rows: Vec<ProfileRow> = trajectory
        .iter()
        .map(|s| ProfileRow { t: s.t, energy: moduli_energy(&s.a), willmore: willmore_energy(&s.a) })
        .collect();
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    Ok(ProfileComparison {
        energy_decreased: last.energy <= first.energy,
        willmore_decreased: last.willmore <= first.willmore,
        rows,
    })
}
