//! Initial-condition presets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::tensor_field::{component_count, SymMatrix, SymTensorField};

/// `amplitude · cos(2πk x / L)` in one stored component.
pub fn single_mode(grid: &Grid, k: i64, component: usize, amplitude: f64) -> Result<SymTensorField> {
    let w = 2.0 * std::f64::consts::PI * k as f64 / grid.period();
    SymTensorField::from_component(grid, component, grid.sample(|x, _| amplitude * (w * x).cos()))
}

pub fn constant(grid: &Grid, entries: &[f64]) -> Result<SymTensorField> {
    SymTensorField::constant(grid, SymMatrix::from_entries(grid.dim(), entries)?)
}

/// Random trigonometric polynomial with wave indices `|j| ≤ cutoff` (mean included),
/// rescaled so that its sup norm equals `amplitude`.
///
/// Coefficients come from a ChaCha8 stream keyed by `seed`, drawn in a fixed
/// order, so the field is reproducible across platforms.
pub fn random_smooth(grid: &Grid, seed: u64, cutoff: u32, amplitude: f64) -> Result<SymTensorField> {
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(Error::InvalidArgument(format!("amplitude must be >= 0, got {amplitude}")));
    }
    if 2 * cutoff as usize >= grid.n() {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} must stay below n/2 = {}", grid.n() / 2)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = cutoff as i64;
    let mut modes = Vec::new();
    let ys: Vec<i64> = if grid.dim() == 1 { vec![0] } else { (-c..=c).collect() };
    for jx in -c..=c {
        for &jy in &ys {
            if jx * jx + jy * jy <= c * c {
                modes.push((jx, jy));
            }
        }
    }

    let base = 2.0 * std::f64::consts::PI / grid.period();
    let mut comps = Vec::with_capacity(component_count(grid.dim()));
    for _ in 0..component_count(grid.dim()) {
        let coeffs: Vec<(f64, f64)> = modes.iter().map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let samples = grid.sample(|x, y| {
            modes
                .iter()
                .zip(&coeffs)
                .map(|(&(jx, jy), &(a, b))| {
                    let phase = base * (jx as f64 * x + jy as f64 * y);
                    a * phase.cos() + b * phase.sin()
                })
                .sum()
        });
        comps.push(samples);
    }
    let raw = SymTensorField::from_components(grid, comps)?;
    let sup = raw.sup_norm();
    if sup == 0.0 {
        return Ok(raw);
    }
    raw.scale(amplitude / sup)
}
