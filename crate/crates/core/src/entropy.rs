//! Entropy functional `W(A, f, η) = ∫(η|∇A|² + ½|A|² + η²|ΔA|² + f) u dμ`
//! with heat-kernel weight `u = e^{−f}/(4πη)^{m/2}`, `η = T − t`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::FlowState;
use crate::geometry::Grid;
use crate::tensor_field::SymTensorField;

/// Sign of the diffusion term in the `f` equation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjointSign {
    /// `∂ₜf = Δf + …` (well posed forward in time).
    #[default]
    Diffusive,
    /// `∂ₜf = −Δf + …` transcribed with `Δ = Σ∂ᵢ²`; anti-diffusive.
    PaperLiteral,
}

/// Tolerance on `∫u = 1` accepted by [`entropy_value`].
pub const NORMALIZATION_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyState {
    grid: Grid,
    pub f: Vec<f64>,
    pub u: Vec<f64>,
    pub horizon: f64,
    pub t: f64,
    /// Total normalization shift added to `f` by the last update.
    pub last_shift: f64,
    /// Largest `|∫u − 1|` seen after any substep of the last update.
    pub last_norm_error: f64,
}

/// `(4πη)^{m/2}`.
fn kernel_scale(eta: f64, dim: usize) -> f64 {
    (4.0 * PI * eta).powf(dim as f64 / 2.0)
}

/// Shift `f` so that `u = e^{−f}/(4πη)^{m/2}` integrates to one.
///
/// Returns `(f_shifted, u, shift)`.
pub fn normalize_weight(f: &[f64], eta: f64, grid: &Grid) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    if !(eta > 0.0) {
        return Err(Error::InvalidEta(eta));
    }
    grid.check_len(f)?;
    let scale = kernel_scale(eta, grid.dim());
    let raw: Vec<f64> = f.iter().map(|v| (-v).exp() / scale).collect();
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::WeightOverflow);
    }
    let z = grid.integrate(&raw)?;
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::WeightOverflow);
    }
    let shift = z.ln();
    let shifted: Vec<f64> = f.iter().map(|v| v + shift).collect();
    let u: Vec<f64> = raw.iter().map(|v| v / z).collect();
    Ok((shifted, u, shift))
}

impl EntropyState {
    /// Normalized state from an arbitrary weight function at time `t < horizon`.
    pub fn new(grid: &Grid, f: Vec<f64>, horizon: f64, t: f64) -> Result<Self> {
        let eta = horizon - t;
        let (f, u, shift) = normalize_weight(&f, eta, grid)?;
        let norm_error = (grid.integrate(&u)? - 1.0).abs();
        Ok(Self { grid: grid.clone(), f, u, horizon, t, last_shift: shift, last_norm_error: norm_error })
    }

    /// Spatially constant weight (`u ≡ 1/vol`).
    pub fn uniform(grid: &Grid, horizon: f64, t: f64) -> Result<Self> {
        Self::new(grid, vec![0.0; grid.len()], horizon, t)
    }

    pub fn eta(&self) -> f64 {
        self.horizon - self.t
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn weight_integral(&self) -> f64 {
        self.grid.integrate(&self.u).expect("own grid")
    }
}

/// `log(vol / (4πη)^{m/2})`: the value of `W` for `A ≡ 0` and constant `f`.
pub fn zero_field_entropy(grid: &Grid, eta: f64) -> f64 {
    (grid.volume() / kernel_scale(eta, grid.dim())).ln()
}

pub fn entropy_value(a: &SymTensorField, state: &EntropyState) -> Result<f64> {
    if a.grid() != &state.grid {
        return Err(Error::GridMismatch);
    }
    let mass = state.weight_integral();
    if !((mass - 1.0).abs() <= NORMALIZATION_GUARD) {
        return Err(Error::Unnormalized(mass));
    }
    let eta = state.eta();
    let grad = a.gradient_density()?;
    let lap = a.laplacian()?.frobenius_sq();
    let sq = a.frobenius_sq();
    let density: Vec<f64> = (0..a.grid().len())
        .map(|p| (eta * grad[p] + 0.5 * sq[p] + eta * eta * lap[p] + state.f[p]) * state.u[p])
        .collect();
    state.grid.integrate(&density)
}

/// Largest explicit substep for the `f` equation on this grid.
///
/// `0.2·h²` divided by `m`, so that the spectral Laplacian (largest symbol `m π²/h²`)
/// stays inside the explicit Euler stability interval in two dimensions as well.
pub fn f_step_limit(grid: &Grid) -> f64 {
    0.2 * grid.spacing().powi(2) / grid.dim() as f64
}

/// Advance `f` by `dt` under `∂ₜf = ±Δf + |∇f|² − tr(A²) + m/(2η)`, renormalizing after every substep.
pub fn evolve_f(state: &EntropyState, a: &SymTensorField, dt: f64, sign: AdjointSign) -> Result<EntropyState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if a.grid() != &state.grid {
        return Err(Error::GridMismatch);
    }
    let reached = state.t + dt;
    if reached >= state.horizon {
        return Err(Error::EntropyHorizon { reached, horizon: state.horizon });
    }

    let grid = &state.grid;
    let m = grid.dim() as f64;
    let tr_a2 = a.frobenius_sq();
    let limit = f_step_limit(grid);
    let substeps = (dt / limit).ceil().max(1.0) as usize;
    let h = dt / substeps as f64;
    let diffusion = match sign {
        AdjointSign::Diffusive => 1.0,
        AdjointSign::PaperLiteral => -1.0,
    };

    let mut f = state.f.clone();
    let mut t = state.t;
    let mut total_shift = 0.0;
    let mut norm_error: f64 = 0.0;
    let mut u = state.u.clone();
    for s in 0..substeps {
        let eta = state.horizon - t;
        let lap = grid.laplacian(&f)?;
        let grad = grid.gradient(&f)?;
        for p in 0..f.len() {
            let grad_sq: f64 = grad.iter().map(|g| g[p] * g[p]).sum();
            f[p] += h * (diffusion * lap[p] + grad_sq - tr_a2[p] + m / (2.0 * eta));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("f equation"));
        }
        t = if s + 1 == substeps { reached } else { state.t + h * (s + 1) as f64 };
        let (shifted, weight, shift) = normalize_weight(&f, state.horizon - t, grid)?;
        f = shifted;
        u = weight;
        total_shift += shift;
        norm_error = norm_error.max((grid.integrate(&u)? - 1.0).abs());
    }

    Ok(EntropyState {
        grid: grid.clone(),
        f,
        u,
        horizon: state.horizon,
        t,
        last_shift: total_shift,
        last_norm_error: norm_error,
    })
}

/// `W` along a trajectory together with the monotonicity verdict.
#[derive(Debug, Clone, Serialize)]
pub struct EntropyMonitor {
    pub series: Vec<(f64, f64)>,
    pub monotone: bool,
    /// Largest `W(t_{j+1}) − W(t_j)`.
    pub max_increase: f64,
    /// Largest `|∫u − 1|` over every substep.
    pub max_norm_error: f64,
    /// Normalization shift applied over each interval.
    pub shifts: Vec<f64>,
}

/// Co-evolve `f` (starting from the uniform weight) with the snapshots of an `A` trajectory.
///
/// On each interval `f` sees the `A` of the left endpoint.
pub fn monitor_entropy(trajectory: &[FlowState], horizon: f64, sign: AdjointSign, tol_w: f64) -> Result<EntropyMonitor> {
    let first = trajectory.first().ok_or(Error::EmptyTrajectory)?;
    if let Some(bad) = trajectory.iter().find(|s| s.t >= horizon) {
        return Err(Error::EntropyHorizon { reached: bad.t, horizon });
    }
    let grid = first.a.grid();
    let mut state = EntropyState::uniform(grid, horizon, first.t)?;
    let mut series = vec![(first.t, entropy_value(&first.a, &state)?)];
    let mut max_norm_error = state.last_norm_error;
    let mut shifts = Vec::with_capacity(trajectory.len());
    for pair in trajectory.windows(2) {
        let dt = pair[1].t - pair[0].t;
        if dt > 0.0 {
            state = evolve_f(&state, &pair[0].a, dt, sign)?;
            max_norm_error = max_norm_error.max(state.last_norm_error);
            shifts.push(state.last_shift);
        }
        series.push((pair[1].t, entropy_value(&pair[1].a, &state)?));
    }
    let max_increase = series.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::NEG_INFINITY, f64::max);
    let monotone = series.windows(2).all(|w| w[1].1 <= w[0].1 + tol_w);
    Ok(EntropyMonitor { series, monotone, max_increase, max_norm_error, shifts })
}
