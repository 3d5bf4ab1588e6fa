//! Linearization about a parallel tensor and perturbation-energy decay.
//!
//! For `A = A∞ + P` with `A∞` constant, the linear part of the flow acts on a
//! Fourier mode `P̂(k)` through a `d × d` symbol `S(k)` (with `d` the number of
//! stored components). The perturbation energy `E(P) = ½∫|∇P|²` then decays at
//! rate `β = −2 max Re spec S(k)` over the nonzero modes.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{run_flow, AmbientModel, FlowCoefficients, FlowRun, Schedule};
use crate::geometry::Grid;
use crate::tensor_field::{component_count, SymMatrix, SymTensorField};

/// Symbol for all wavevectors sharing one value of `|k|²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSymbol {
    pub k2: f64,
    /// Row-major `d × d` matrix on stored components.
    pub matrix: Vec<f64>,
    /// Largest real part of the eigenvalues.
    pub growth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearizedOperator {
    pub background: SymMatrix,
    /// Sorted by `k2`; the first entry is the constant mode.
    pub modes: Vec<ModeSymbol>,
}

/// Apply the linearized reaction-plus-principal part to a single-mode amplitude.
fn apply_symbol(k2: f64, a: &SymMatrix, p: &SymMatrix, ambient: &AmbientModel, coeffs: &FlowCoefficients) -> SymMatrix {
    let [t1, t2, t3, t4, t5] = coeffs.theta;
    let c = ambient.curvature();
    let m = a.dim() as f64;
    let lap = -k2;

    // A∞P + PA∞.
    let anti = a.sym_product(p).scale(2.0);
    let a2 = a.square();
    let a3 = a2.sym_product(a);
    // A³P + PA³ + A²PA + APA².
    let quartic = a3
        .sym_product(p)
        .scale(2.0)
        .add(&sandwich_pair(&a2, p, a));

    let mut out = p.scale(-k2 * k2);
    out = out.add(&anti.scale(t1 * lap));
    out = out.add(&a2.sym_product(p).scale(t2 * lap));
    out = out.add(&ambient.contract(p).scale(t3 * c * lap));
    out = out.add(&quartic.scale(t4));
    let curv = anti.scale(m).sub(&a.scale(p.trace())).sub(&p.scale(a.trace()));
    out.add(&curv.scale(t5 * c))
}

/// `XPY + YPX` for symmetric `X`, `Y`, `P`.
fn sandwich_pair(x: &SymMatrix, p: &SymMatrix, y: &SymMatrix) -> SymMatrix {
    let d = x.dim();
    let full = |s: &SymMatrix| {
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate().take(d) {
            for (j, v) in row.iter_mut().enumerate().take(d) {
                *v = s.get(i, j);
            }
        }
        out
    };
    let mul = |a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]| {
        let mut out = [[0.0; 2]; 2];
        for i in 0..d {
            for j in 0..d {
                out[i][j] = (0..d).map(|l| a[i][l] * b[l][j]).sum();
            }
        }
        out
    };
    // YPX is the transpose of XPY.
    let xpy = mul(&mul(&full(x), &full(p)), &full(y));
    let entries = match d {
        1 => vec![2.0 * xpy[0][0]],
        _ => vec![2.0 * xpy[0][0], xpy[0][1] + xpy[1][0], 2.0 * xpy[1][1]],
    };
    SymMatrix::from_entries(d, &entries).expect("dimension checked")
}

/// Symbol matrix `S(k)` for one value of `|k|²`.
pub fn symbol_matrix(k2: f64, background: &SymMatrix, ambient: &AmbientModel, coeffs: &FlowCoefficients) -> DMatrix<f64> {
    let d = component_count(background.dim());
    let mut s = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut unit = vec![0.0; d];
        unit[j] = 1.0;
        let e = SymMatrix::from_entries(background.dim(), &unit).expect("dimension checked");
        let col = apply_symbol(k2, background, &e, ambient, coeffs);
        for i in 0..d {
            s[(i, j)] = col.entries()[i];
        }
    }
    s
}

fn max_real_eigenvalue(s: &DMatrix<f64>) -> f64 {
    if s.nrows() == 1 {
        return s[(0, 0)];
    }
    s.clone().complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Symbol table over the distinct `|k|²` values of the grid.
pub fn linearize(background: &SymMatrix, ambient: &AmbientModel, coeffs: &FlowCoefficients, grid: &Grid) -> Result<LinearizedOperator> {
    if background.dim() != grid.dim() {
        return Err(Error::ShapeMismatch { expected: grid.dim(), actual: background.dim() });
    }
    let mut k2s: Vec<f64> = grid.k2().to_vec();
    k2s.sort_by(f64::total_cmp);
    k2s.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    let modes = k2s
        .into_iter()
        .map(|k2| {
            let s = symbol_matrix(k2, background, ambient, coeffs);
            ModeSymbol { k2, growth: max_real_eigenvalue(&s), matrix: s.transpose().as_slice().to_vec() }
        })
        .collect();
    Ok(LinearizedOperator { background: *background, modes })
}

/// `β = −2 max Re spec S(k)` over the included modes.
pub fn predicted_decay_rate(op: &LinearizedOperator, exclude_zero_mode: bool) -> f64 {
    let worst = op
        .modes
        .iter()
        .filter(|m| !(exclude_zero_mode && m.k2 == 0.0))
        .map(|m| m.growth)
        .fold(f64::NEG_INFINITY, f64::max);
    -2.0 * worst
}

/// Least-squares fit of `log E = log E₀ − βt`; returns `(β, r²)`.
pub fn fit_decay_rate(series: &[(f64, f64)]) -> Result<(f64, f64)> {
    const MIN_SAMPLES: usize = 10;
    if series.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_SAMPLES, got: series.len() });
    }
    if let Some(i) = series.iter().position(|(_, e)| !(*e > 0.0)) {
        return Err(Error::NonPositiveSample(i));
    }
    let n = series.len() as f64;
    let mt = series.iter().map(|p| p.0).sum::<f64>() / n;
    let my = series.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let stt: f64 = series.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if stt == 0.0 {
        return Err(Error::InvalidArgument("sample times are all equal".into()));
    }
    let sty: f64 = series.iter().map(|p| (p.0 - mt) * (p.1.ln() - my)).sum();
    let slope = sty / stt;
    let syy: f64 = series.iter().map(|p| (p.1.ln() - my).powi(2)).sum();
    let r2 = if syy == 0.0 {
        1.0
    } else {
        let ss_res: f64 = series.iter().map(|p| (p.1.ln() - my - slope * (p.0 - mt)).powi(2)).sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok((-slope, r2))
}

/// Outcome of one perturbation experiment.
#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub beta_predicted: f64,
    pub beta_fitted: f64,
    pub fit_r2: f64,
    pub window: [f64; 2],
    /// Sup norm of the initial perturbation.
    pub amplitude: f64,
    /// Frobenius norm of the mean of `P` at the final time.
    pub zero_mode_drift: f64,
    pub samples: usize,
    /// `E` dropped by the full factor `10⁴` within the run.
    pub window_reached: bool,
    /// `E` rose somewhere in the fit window (or never decayed).
    pub unstable: bool,
}

/// Largest perturbation amplitude accepted as "linear regime".
pub const LINEAR_AMPLITUDE_CAP: f64 = 1e-2;

const WINDOW_START: f64 = 10.0;
const WINDOW_END: f64 = 1e4;

/// Flow `A∞ + amplitude·P₀` and fit the decay of `E(P) = ½∫|∇P|²`.
///
/// Since `A∞` is constant, `E(P(t)) = F(A(t))`, which the run records after every step.
/// The monotonicity guard is switched off: growth is a finding here, not a step failure.
pub fn perturbation_experiment(
    background: &SymMatrix,
    p0: &SymTensorField,
    amplitude: f64,
    ambient: &AmbientModel,
    coeffs: &FlowCoefficients,
    schedule: &Schedule,
) -> Result<DecayReport> {
    perturbation_run(background, p0, amplitude, ambient, coeffs, schedule).map(|(report, _)| report)
}

/// [`perturbation_experiment`] that also hands back the underlying run.
pub fn perturbation_run(
    background: &SymMatrix,
    p0: &SymTensorField,
    amplitude: f64,
    ambient: &AmbientModel,
    coeffs: &FlowCoefficients,
    schedule: &Schedule,
) -> Result<(DecayReport, FlowRun)> {
    if !(amplitude.is_finite() && (0.0..=LINEAR_AMPLITUDE_CAP).contains(&amplitude)) {
        return Err(Error::InvalidArgument(format!("amplitude {amplitude} exceeds the linear-regime cap {LINEAR_AMPLITUDE_CAP}")));
    }
    let grid = p0.grid();
    let mean = p0.mean();
    if mean.frobenius_sq().sqrt() > 1e-12 * p0.sup_norm().max(1.0) {
        return Err(Error::InvalidArgument("initial perturbation must be mean-free".into()));
    }
    let perturbation = p0.scale(amplitude)?;
    if amplitude == 0.0 || perturbation.sup_norm() == 0.0 {
        return Err(Error::ZeroPerturbation);
    }

    let op = linearize(background, ambient, coeffs, grid)?;
    let beta_predicted = predicted_decay_rate(&op, true);

    let base = SymTensorField::constant(grid, *background)?;
    let initial = base.add(&perturbation)?;
    let mut sched = *schedule;
    sched.monotone_guard = false;
    let run = run_flow(&initial, ambient, coeffs, &sched)?;

    let e0 = run.records[0].energy;
    let series: Vec<(f64, f64)> = run.records.iter().map(|r| (r.t, r.energy)).collect();
    let in_window: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(_, e)| *e <= e0 / WINDOW_START && *e >= e0 / WINDOW_END)
        .collect();
    let window_reached = series.iter().any(|(_, e)| *e < e0 / WINDOW_END);

    let (fit_series, decayed) = if in_window.len() >= 10 { (in_window, true) } else { (series[1..].to_vec(), false) };
    let (beta_fitted, fit_r2) = fit_decay_rate(&fit_series)?;
    let rises = fit_series.windows(2).any(|w| w[1].1 > w[0].1 * (1.0 + 1e-10));
    let drift = run.final_state.a.mean().sub(background).frobenius_sq().sqrt();

    let report = DecayReport {
        beta_predicted,
        beta_fitted,
        fit_r2,
        window: [fit_series[0].0, fit_series[fit_series.len() - 1].0],
        amplitude: perturbation.sup_norm(),
        zero_mode_drift: drift,
        samples: fit_series.len(),
        window_reached,
        unstable: rises || !decayed,
    };
    Ok((report, run))
}

/// Minimal Rayleigh quotient `‖Δ∇P‖² / ‖∇P‖²` over mean-free single-mode fields.
///
/// Every wave index other than zero and the Nyquist lines is tried by building the
/// mode on the grid and differentiating it spectrally.
pub fn coercivity_constant(grid: &Grid) -> Result<f64> {
    let half = (grid.n() / 2) as i64;
    let ys: Vec<i64> = if grid.dim() == 1 { vec![0] } else { (1 - half..half).collect() };
    let base = 2.0 * std::f64::consts::PI / grid.period();
    let mut best = f64::INFINITY;
    for jx in 1 - half..half {
        for &jy in &ys {
            if jx == 0 && jy == 0 {
                continue;
            }
            let p = grid.sample(|x, y| (base * (jx as f64 * x + jy as f64 * y)).cos());
            let grad = grid.gradient(&p)?;
            let mut num = 0.0;
            let mut den = 0.0;
            for g in &grad {
                den += grid.integrate(&g.iter().map(|v| v * v).collect::<Vec<_>>())?;
                let lg = grid.laplacian(g)?;
                num += grid.integrate(&lg.iter().map(|v| v * v).collect::<Vec<_>>())?;
            }
            best = best.min(num / den);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::single_mode;
    use crate::tensor_field::GaugeRotation;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn zero_background_is_pure_biharmonic() {
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        let amb = AmbientModel::flat();
        let op = linearize(&SymMatrix::zero(2), &amb, &FlowCoefficients::default(), &g).unwrap();
        for mode in &op.modes {
            let s = DMatrix::from_row_slice(3, 3, &mode.matrix);
            let expected = DMatrix::identity(3, 3) * (-mode.k2 * mode.k2);
            assert!((s - expected).abs().max() < 1e-14);
        }
    }

    #[test]
    fn scalar_symbol_oracle() {
        // S(k) = −k⁴ + θ₁(−k²)(2a) + θ₂a²(−k²) + θ₄·4a³ at m = 1, c = 0.
        let a = 0.3;
        let th = [0.7, -1.1, 2.0, 0.4, 5.0];
        let coeffs = FlowCoefficients::new(th).unwrap();
        for k in [0.0f64, 1.0, 2.0, 5.0] {
            let k2 = k * k;
            let s = symbol_matrix(k2, &SymMatrix::scalar(1, a), &AmbientModel::flat(), &coeffs);
            let oracle = -k2 * k2 + th[0] * (-k2) * 2.0 * a + th[1] * a * a * (-k2) + th[3] * 4.0 * a.powi(3);
            assert_relative_eq!(s[(0, 0)], oracle, max_relative = 1e-14, epsilon = 1e-15);
        }
    }

    #[test]
    fn symbol_matches_finite_difference_of_rhs() {
        // Directional derivative of the full right-hand side at A∞ along a single mode.
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        let bg = SymMatrix::from_entries(2, &[0.4, -0.2, 0.1]).unwrap();
        let amb = AmbientModel::new(-0.7, true).unwrap();
        let coeffs = FlowCoefficients::new([0.9, 1.3, -0.6, 0.8, 1.7]).unwrap();
        let base = SymTensorField::constant(&g, bg).unwrap();
        let k = 2.0;
        let s = symbol_matrix(k * k, &bg, &amb, &coeffs);
        for comp in 0..3 {
            let p = single_mode(&g, 2, comp, 1.0).unwrap();
            let eps = 1e-6;
            let plus = crate::flow::assemble_rhs(&base.axpy(eps, &p).unwrap(), &amb, &coeffs).unwrap();
            let minus = crate::flow::assemble_rhs(&base.axpy(-eps, &p).unwrap(), &amb, &coeffs).unwrap();
            let deriv = plus.sub(&minus).unwrap().scale(0.5 / eps).unwrap();
            // At x = 0 the mode equals 1, so the derivative there is column `comp` of S.
            let at0 = deriv.at(0);
            for i in 0..3 {
                assert!((at0.entries()[i] - s[(i, comp)]).abs() < 1e-6, "entry ({i},{comp})");
            }
        }
    }

    #[test]
    fn principal_part_dominates() {
        let bg = SymMatrix::from_entries(2, &[0.5, 0.3, -0.2]).unwrap();
        let amb = AmbientModel::new(-1.0, false).unwrap();
        let k2 = 1e6;
        let s = symbol_matrix(k2, &bg, &amb, &FlowCoefficients::default()) / (k2 * k2);
        assert!((s + DMatrix::identity(3, 3)).abs().max() < 1e-5);
    }

    #[test]
    fn predicted_rate_examples() {
        let amb = AmbientModel::flat();
        for g in [Grid::new(1, 64, 2.0 * PI).unwrap(), Grid::new(2, 16, 2.0 * PI).unwrap()] {
            let op = linearize(&SymMatrix::zero(g.dim()), &amb, &FlowCoefficients::zero(), &g).unwrap();
            assert_relative_eq!(predicted_decay_rate(&op, true), 2.0, max_relative = 1e-14);
        }
        let g = Grid::new(1, 64, 2.0 * PI).unwrap();
        let op = linearize(&SymMatrix::zero(1), &amb, &FlowCoefficients::default(), &g).unwrap();
        assert_eq!(predicted_decay_rate(&op, false), 0.0);
    }

    #[test]
    fn fit_examples() {
        let s: Vec<(f64, f64)> = (0..100).map(|i| (0.01 * i as f64, (-2.0 * 0.01 * i as f64).exp())).collect();
        let (b, r2) = fit_decay_rate(&s).unwrap();
        assert!((b - 2.0).abs() < 1e-10 && (r2 - 1.0).abs() < 1e-10);
        let s: Vec<(f64, f64)> = (0..50).map(|i| (0.1 * i as f64, 5.0 * (-0.3 * i as f64).exp())).collect();
        assert_relative_eq!(fit_decay_rate(&s).unwrap().0, 3.0, max_relative = 1e-12);
        let mut bad = s.clone();
        bad[7].1 = 0.0;
        assert!(matches!(fit_decay_rate(&bad), Err(Error::NonPositiveSample(7))));
        assert!(matches!(fit_decay_rate(&s[..5]), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn linear_control_experiment() {
        let g = Grid::new(1, 64, 2.0 * PI).unwrap();
        let p0 = single_mode(&g, 1, 0, 1.0).unwrap();
        let sched = Schedule::new(6.0, 1e-2, 1e-2);
        let r = perturbation_experiment(&SymMatrix::zero(1), &p0, 1e-3, &AmbientModel::flat(), &FlowCoefficients::zero(), &sched)
            .unwrap();
        assert!((r.beta_fitted - 2.0).abs() / 2.0 < 1e-6, "{r:?}");
        assert_relative_eq!(r.beta_predicted, 2.0, max_relative = 1e-14);
        assert!(r.window_reached && !r.unstable);
        assert!(r.zero_mode_drift < 1e-15);
    }

    #[test]
    fn zero_perturbation_rejected() {
        let g = Grid::new(1, 16, 2.0 * PI).unwrap();
        let p0 = single_mode(&g, 1, 0, 1.0).unwrap();
        let sched = Schedule::new(1.0, 1e-2, 1e-2);
        let r = perturbation_experiment(&SymMatrix::zero(1), &p0, 0.0, &AmbientModel::flat(), &FlowCoefficients::zero(), &sched);
        assert!(matches!(r, Err(Error::ZeroPerturbation)));
    }

    #[test]
    fn gauge_covariant_rate() {
        let g = Grid::new(2, 16, PI).unwrap();
        let bg = SymMatrix::from_entries(2, &[0.05, 0.02, -0.03]).unwrap();
        let p0 = single_mode(&g, 1, 0, 1.0).unwrap().add(&single_mode(&g, 1, 1, 0.5).unwrap()).unwrap();
        let amb = AmbientModel::new(-1.0, true).unwrap();
        let sched = Schedule::new(1.0, 1e-3, 1e-3);
        let rot = GaugeRotation::rotation(0.8);
        let r1 = perturbation_experiment(&bg, &p0, 1e-3, &amb, &FlowCoefficients::default(), &sched).unwrap();
        let r2 = perturbation_experiment(
            &bg.conjugate(&rot.rows()),
            &p0.conjugate(&rot).unwrap(),
            1e-3,
            &amb,
            &FlowCoefficients::default(),
            &sched,
        )
        .unwrap();
        assert!((r1.beta_fitted - r2.beta_fitted).abs() < 1e-8);
        assert!((r1.beta_predicted - r2.beta_predicted).abs() < 1e-8);
    }

    #[test]
    fn coercivity_equals_smallest_wavenumber() {
        for g in [Grid::new(1, 32, 2.0 * PI).unwrap(), Grid::new(2, 16, PI).unwrap()] {
            let lam = coercivity_constant(&g).unwrap();
            assert_relative_eq!(lam, g.k_min().powi(4), max_relative = 1e-10);
        }
    }
}
