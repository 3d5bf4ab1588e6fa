//! The moduli flow `∂ₜA = −Δ²A + R(A)` and its exponential time stepper.
//!
//! The reaction term is instantiated with weights `θ₁…θ₅` as
//!
//! ```text
//! R(A) = θ₁ Δ(A²) + θ₂ sym(A² ΔA) + θ₃ c K(ΔA) + θ₄ A⁴ + θ₅ c (m A² − tr(A) A)
//! ```
//!
//! with `K(X) = mX − tr(X) Id` when trace adjusted and `K(X) = mX` otherwise.
//! The ambient space has constant sectional curvature `c ≤ 0`, so `∇Rᴺ = 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{diagnostics, moduli_energy, DiagnosticsRecord};
use crate::tensor_field::{SymMatrix, SymTensorField};

/// Constant-curvature ambient model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmbientModel {
    curvature: f64,
    bound: f64,
    trace_adjusted: bool,
}

impl AmbientModel {
    /// Curvature `c ≤ 0` with bound `Λ = |c|`.
    pub fn new(curvature: f64, trace_adjusted: bool) -> Result<Self> {
        Self::with_bound(curvature, curvature.abs(), trace_adjusted)
    }

    pub fn with_bound(curvature: f64, bound: f64, trace_adjusted: bool) -> Result<Self> {
        if !curvature.is_finite() || curvature > 0.0 {
            return Err(Error::PositiveCurvature(curvature));
        }
        if !(bound >= curvature.abs()) {
            return Err(Error::InvalidArgument(format!("curvature bound {bound} is below |c| = {}", curvature.abs())));
        }
        Ok(Self { curvature, bound, trace_adjusted })
    }

    pub fn flat() -> Self {
        Self { curvature: 0.0, bound: 0.0, trace_adjusted: false }
    }

    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn trace_adjusted(&self) -> bool {
        self.trace_adjusted
    }

    /// `K(X)`: `mX − tr(X) Id` or `mX`.
    pub fn contract(&self, x: &SymMatrix) -> SymMatrix {
        let m = x.dim() as f64;
        let mx = x.scale(m);
        if self.trace_adjusted {
            mx.sub(&SymMatrix::scalar(x.dim(), x.trace()))
        } else {
            mx
        }
    }
}

/// Weights of the five reaction terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowCoefficients {
    pub theta: [f64; 5],
}

impl Default for FlowCoefficients {
    fn default() -> Self {
        Self { theta: [1.0; 5] }
    }
}

impl FlowCoefficients {
    /// All reaction terms off: the pure biharmonic heat flow.
    pub fn zero() -> Self {
        Self { theta: [0.0; 5] }
    }

    pub fn new(theta: [f64; 5]) -> Result<Self> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("flow coefficients must be finite".into()));
        }
        Ok(Self { theta })
    }
}

/// `(A, t, step, dt_last)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub a: SymTensorField,
    pub t: f64,
    pub step: u64,
    pub dt_last: f64,
}

impl FlowState {
    pub fn new(a: SymTensorField) -> Self {
        Self { a, t: 0.0, step: 0, dt_last: 0.0 }
    }
}

fn check_curvature(ambient: &AmbientModel) -> Result<()> {
    if ambient.curvature > 0.0 {
        return Err(Error::PositiveCurvature(ambient.curvature));
    }
    Ok(())
}

/// Everything but the principal part: `N(A) = RHS(A) + Δ²A`.
pub fn nonlinear_part(a: &SymTensorField, ambient: &AmbientModel, coeffs: &FlowCoefficients) -> Result<SymTensorField> {
    check_curvature(ambient)?;
    let [t1, t2, t3, t4, t5] = coeffs.theta;
    let c = ambient.curvature;
    let m = a.dim() as f64;

    let a2 = a.matrix_power(2)?;
    let lap_a = a.laplacian()?;
    let lap_a2 = if t1 != 0.0 { a2.laplacian()? } else { SymTensorField::zeros(a.grid()) };

    let points = crate::exec::map_points(a.grid().len(), |p| {
        let ap = a.at(p);
        let sq = a2.at(p);
        let lap = lap_a.at(p);
        let mut out = lap_a2.at(p).scale(t1);
        out = out.add(&sq.sym_product(&lap).scale(t2));
        out = out.add(&ambient.contract(&lap).scale(t3 * c));
        out = out.add(&sq.square().scale(t4));
        out = out.add(&sq.scale(m).sub(&ap.scale(ap.trace())).scale(t5 * c));
        out
    });
    let d = crate::tensor_field::component_count(a.dim());
    let mut comps = vec![Vec::with_capacity(points.len()); d];
    for pt in &points {
        for (col, v) in comps.iter_mut().zip(pt.entries()) {
            col.push(*v);
        }
    }
    SymTensorField::from_components(a.grid(), comps)
}

/// Full right-hand side `−Δ²A + R(A)`.
pub fn assemble_rhs(a: &SymTensorField, ambient: &AmbientModel, coeffs: &FlowCoefficients) -> Result<SymTensorField> {
    let n = nonlinear_part(a, ambient, coeffs)?;
    n.sub(&a.bilaplacian()?)
}

/// `φ₁(z) = (eᶻ − 1)/z`, `φ₁(0) = 1`.
pub fn phi1(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        z.exp_m1() / z
    }
}

/// One exponential-Euler step: per Fourier mode
/// `Â⁺ = e^{−|k|⁴dt} Â + dt φ₁(−|k|⁴dt) N̂(A)`.
pub fn step_etd1(state: &FlowState, dt: f64, ambient: &AmbientModel, coeffs: &FlowCoefficients) -> Result<FlowState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !state.a.is_finite() {
        return Err(Error::NonFinite("step input"));
    }
    let grid = state.a.grid();
    let nl = nonlinear_part(&state.a, ambient, coeffs)?;
    let k2 = grid.k2();
    let (decay, forcing): (Vec<f64>, Vec<f64>) = k2
        .iter()
        .map(|k| {
            let z = -k * k * dt;
            (z.exp(), dt * phi1(z))
        })
        .unzip();

    let mut comps = Vec::with_capacity(state.a.components().len());
    for (ac, nc) in state.a.components().iter().zip(nl.components()) {
        let mut ah = grid.forward(ac)?;
        let nh = grid.forward(nc)?;
        for q in 0..ah.len() {
            ah[q] = ah[q] * decay[q] + nh[q] * forcing[q];
        }
        comps.push(grid.inverse(ah)?);
    }
    if comps.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("etd1 step"));
    }
    Ok(FlowState {
        a: SymTensorField::from_components(grid, comps)?,
        t: state.t + dt,
        step: state.step + 1,
        dt_last: dt,
    })
}

/// `sup |RHS(A)| ≤ tol`: a stationary point of the flow.
pub fn detect_stationary(state: &FlowState, ambient: &AmbientModel, coeffs: &FlowCoefficients, tol: f64) -> Result<bool> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    Ok(assemble_rhs(&state.a, ambient, coeffs)?.sup_norm() <= tol)
}

/// Time-stepping schedule for [`run_flow`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    pub t_end: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Factor applied to the step after a rejection (0.5 halves it).
    pub safety: f64,
    /// Output cadence; steps are clipped to land on every multiple.
    pub output_every: f64,
    /// Reject steps that raise `F` by more than `energy_tol·(1 + F₀)`.
    pub monotone_guard: bool,
    pub energy_tol: f64,
}

impl Schedule {
    pub fn new(t_end: f64, dt_init: f64, dt_max: f64) -> Self {
        Self {
            t_end,
            dt_init,
            dt_min: 1e-12,
            dt_max,
            safety: 0.5,
            output_every: t_end,
            monotone_guard: true,
            energy_tol: 1e-12,
        }
    }

    pub fn with_output_every(mut self, every: f64) -> Self {
        self.output_every = every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidSchedule(msg.to_string()));
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad("t_end must be > 0");
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad("need 0 < dt_min <= dt_init <= dt_max");
        }
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return bad("safety must lie in (0, 1)");
        }
        if !(self.output_every > 0.0) {
            return bad("output interval must be > 0");
        }
        if !(self.energy_tol >= 0.0) {
            return bad("energy tolerance must be >= 0");
        }
        Ok(())
    }
}

/// Adaptive step-size controller state; checkpointed with the flow state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Controller {
    pub dt_next: f64,
    pub accept_streak: u32,
    /// `F` at the start of the run; scales the monotonicity tolerance.
    pub energy_ref: f64,
}

const GROWTH_STREAK: u32 = 10;
const GROWTH_FACTOR: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rejection {
    /// Number of accepted steps before the rejection.
    pub after_step: u64,
    pub t: f64,
    pub dt: f64,
    pub non_finite: bool,
}

/// Steps the flow one accepted step at a time.
#[derive(Debug, Clone)]
pub struct FlowDriver {
    state: FlowState,
    energy: f64,
    ambient: AmbientModel,
    coeffs: FlowCoefficients,
    schedule: Schedule,
    controller: Controller,
    rejections: Vec<Rejection>,
}

/// Result of [`FlowDriver::advance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Advance {
    /// The step landed on an output time (or `t_end`).
    pub at_output: bool,
}

impl FlowDriver {
    pub fn new(initial: FlowState, ambient: AmbientModel, coeffs: FlowCoefficients, schedule: Schedule) -> Result<Self> {
        schedule.validate()?;
        let energy = moduli_energy(&initial.a);
        let controller = Controller { dt_next: schedule.dt_init, accept_streak: 0, energy_ref: energy };
        Self::resume(initial, controller, ambient, coeffs, schedule)
    }

    /// Continue from a checkpointed state and controller.
    pub fn resume(
        state: FlowState,
        controller: Controller,
        ambient: AmbientModel,
        coeffs: FlowCoefficients,
        schedule: Schedule,
    ) -> Result<Self> {
        schedule.validate()?;
        check_curvature(&ambient)?;
        if !state.a.is_finite() {
            return Err(Error::NonFinite("initial data"));
        }
        if !(controller.dt_next > 0.0) {
            return Err(Error::InvalidSchedule("controller step must be > 0".into()));
        }
        let energy = moduli_energy(&state.a);
        Ok(Self { state, energy, ambient, coeffs, schedule, controller, rejections: Vec::new() })
    }

    pub fn state(&self) -> &FlowState {
        &self.state
    }

    pub fn into_state(self) -> FlowState {
        self.state
    }

    pub fn controller(&self) -> Controller {
        self.controller
    }

    pub fn rejections(&self) -> &[Rejection] {
        &self.rejections
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn done(&self) -> bool {
        self.state.t >= self.schedule.t_end
    }

    fn next_target(&self) -> f64 {
        let every = self.schedule.output_every;
        let index = (self.state.t / every * (1.0 + 1e-12)).floor() + 1.0;
        (index * every).min(self.schedule.t_end)
    }

    /// Take one accepted step, retrying with smaller steps after rejections.
    pub fn advance(&mut self) -> Result<Advance> {
        if self.done() {
            return Err(Error::InvalidSchedule("run already reached t_end".into()));
        }
        let target = self.next_target();
        loop {
            let remaining = target - self.state.t;
            // A step that reaches the target up to roundoff lands on it exactly.
            let clipped = remaining <= self.controller.dt_next * (1.0 + 1e-9);
            let dt = if clipped { remaining } else { self.controller.dt_next };

            let trial = step_etd1(&self.state, dt, &self.ambient, &self.coeffs);
            let verdict = match trial {
                Ok(next) => {
                    let e = moduli_energy(&next.a);
                    let tol = self.schedule.energy_tol * (1.0 + self.controller.energy_ref);
                    if !e.is_finite() {
                        Err(true)
                    } else if self.schedule.monotone_guard && e > self.energy + tol {
                        Err(false)
                    } else {
                        Ok((next, e))
                    }
                }
                Err(Error::NonFinite(_)) => Err(true),
                Err(other) => return Err(other),
            };

            match verdict {
                Ok((mut next, e)) => {
                    if clipped {
                        next.t = target;
                    }
                    self.state = next;
                    self.energy = e;
                    self.controller.accept_streak += 1;
                    if self.controller.accept_streak >= GROWTH_STREAK {
                        self.controller.dt_next = (self.controller.dt_next * GROWTH_FACTOR).min(self.schedule.dt_max);
                        self.controller.accept_streak = 0;
                    }
                    return Ok(Advance { at_output: clipped });
                }
                Err(non_finite) => {
                    self.rejections.push(Rejection { after_step: self.state.step, t: self.state.t, dt, non_finite });
                    self.controller.accept_streak = 0;
                    self.controller.dt_next = self.schedule.safety * dt;
                    if self.controller.dt_next < self.schedule.dt_min {
                        return Err(Error::BlowUp {
                            t: self.state.t,
                            dt: self.controller.dt_next,
                            last_good: Box::new(self.state.clone()),
                        });
                    }
                }
            }
        }
    }
}

/// Output of [`run_flow`].
#[derive(Debug, Clone)]
pub struct FlowRun {
    /// Diagnostics after every accepted step, starting with the initial state.
    pub records: Vec<DiagnosticsRecord>,
    /// States at every output time, starting with the initial state.
    pub snapshots: Vec<FlowState>,
    pub final_state: FlowState,
    pub controller: Controller,
    pub rejections: Vec<Rejection>,
}

impl FlowRun {
    /// Diagnostics at the snapshot times only.
    pub fn snapshot_records(&self) -> Vec<&DiagnosticsRecord> {
        let mut out = Vec::with_capacity(self.snapshots.len());
        let mut it = self.records.iter();
        for s in &self.snapshots {
            if let Some(r) = it.by_ref().find(|r| r.t == s.t) {
                out.push(r);
            }
        }
        out
    }
}

/// Integrate from `initial` to `schedule.t_end`.
pub fn run_flow(
    initial: &SymTensorField,
    ambient: &AmbientModel,
    coeffs: &FlowCoefficients,
    schedule: &Schedule,
) -> Result<FlowRun> {
    let driver = FlowDriver::new(FlowState::new(initial.clone()), *ambient, *coeffs, *schedule)?;
    drive(driver)
}

/// Run a (possibly resumed) driver to completion.
pub fn drive(mut driver: FlowDriver) -> Result<FlowRun> {
    let mut records = vec![diagnostics(driver.state())?];
    let mut snapshots = vec![driver.state().clone()];
    while !driver.done() {
        let adv = driver.advance()?;
        records.push(diagnostics(driver.state())?);
        if adv.at_output {
            snapshots.push(driver.state().clone());
        }
    }
    let controller = driver.controller();
    let rejections = driver.rejections().to_vec();
    Ok(FlowRun { records, snapshots, final_state: driver.into_state(), controller, rejections })
}
