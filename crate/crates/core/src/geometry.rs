//! Flat periodic grids and exact trigonometric calculus on them.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic sample grid on the circle (m = 1) or the square torus (m = 2).
///
/// Samples are stored with the x index slowest: point `p = ix * n + iy`.
/// Spectral index `q` uses the same layout over wave indices `j`, where
/// `j ∈ {0, 1, …, n/2, −n/2+1, …, −1}` and the physical wavenumber is `2πj/L`.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

struct GridInner {
    dim: usize,
    n: usize,
    period: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// |k|² per spectral index, Nyquist included.
    k2: Vec<f64>,
    /// Per-axis wavenumber used by first derivatives (Nyquist zeroed).
    kd: Vec<[f64; 2]>,
    wave: Vec<[i64; 2]>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.inner.dim)
            .field("n", &self.inner.n)
            .field("period", &self.inner.period)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.dim == other.inner.dim
                && self.inner.n == other.inner.n
                && self.inner.period.to_bits() == other.inner.period.to_bits())
    }
}

fn signed_index(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

impl Grid {
    pub fn new(dim: usize, n: usize, period: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("n must be even, got {n}")));
        }
        if n < 8 {
            return Err(Error::InvalidGrid(format!("n must be >= 8, got {n}")));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidGrid(format!("period must be positive, got {period}")));
        }

        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);

        let base = 2.0 * PI / period;
        let total = n.pow(dim as u32);
        let mut k2 = Vec::with_capacity(total);
        let mut kd = Vec::with_capacity(total);
        let mut wave = Vec::with_capacity(total);
        for q in 0..total {
            let (jx, jy) = if dim == 1 { (q, 0) } else { (q / n, q % n) };
            let sx = signed_index(jx, n);
            let sy = if dim == 1 { 0 } else { signed_index(jy, n) };
            let kx = base * sx as f64;
            let ky = base * sy as f64;
            k2.push(kx * kx + ky * ky);
            let dx = if jx == n / 2 { 0.0 } else { kx };
            let dy = if dim == 2 && jy == n / 2 { 0.0 } else { ky };
            kd.push([dx, dy]);
            wave.push([sx, sy]);
        }

        Ok(Self {
            inner: Arc::new(GridInner { dim, n, period, fwd, inv, k2, kd, wave }),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn period(&self) -> f64 {
        self.inner.period
    }

    pub fn spacing(&self) -> f64 {
        self.inner.period / self.inner.n as f64
    }

    /// Number of sample points, `n^m`.
    pub fn len(&self) -> usize {
        self.inner.k2.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn volume(&self) -> f64 {
        self.inner.period.powi(self.inner.dim as i32)
    }

    /// Smallest nonzero wavenumber magnitude, `2π/L`.
    pub fn k_min(&self) -> f64 {
        2.0 * PI / self.inner.period
    }

    /// Physical coordinates of sample `p` (second entry is 0 for m = 1).
    pub fn coords(&self, p: usize) -> [f64; 2] {
        let h = self.spacing();
        let n = self.inner.n;
        if self.inner.dim == 1 {
            [h * p as f64, 0.0]
        } else {
            [h * (p / n) as f64, h * (p % n) as f64]
        }
    }

    /// Sample a function of `(x, y)` on the grid.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|p| {
                let [x, y] = self.coords(p);
                f(x, y)
            })
            .collect()
    }

    /// |k|² for every spectral index.
    pub fn k2(&self) -> &[f64] {
        &self.inner.k2
    }

    /// Signed integer wave indices for every spectral index.
    pub fn wave_indices(&self) -> &[[i64; 2]] {
        &self.inner.wave
    }

    pub(crate) fn derivative_wavenumbers(&self) -> &[[f64; 2]] {
        &self.inner.kd
    }

    pub(crate) fn check_len(&self, samples: &[f64]) -> Result<()> {
        if samples.len() != self.len() {
            return Err(Error::ShapeMismatch { expected: self.len(), actual: samples.len() });
        }
        Ok(())
    }

    /// Unnormalized forward DFT of real samples.
    pub fn forward(&self, samples: &[f64]) -> Result<Vec<Complex64>> {
        self.check_len(samples)?;
        let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, &self.inner.fwd);
        Ok(buf)
    }

    /// Inverse DFT including the `1/n^m` factor; the imaginary residue is dropped.
    pub fn inverse(&self, mut spectrum: Vec<Complex64>) -> Result<Vec<f64>> {
        if spectrum.len() != self.len() {
            return Err(Error::ShapeMismatch { expected: self.len(), actual: spectrum.len() });
        }
        self.transform(&mut spectrum, &self.inner.inv);
        let norm = 1.0 / self.len() as f64;
        Ok(spectrum.into_iter().map(|c| c.re * norm).collect())
    }

    fn transform(&self, buf: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.inner.n;
        // Contiguous axis (y for m = 2, x for m = 1): rustfft handles the batch.
        plan.process(buf);
        if self.inner.dim == 2 {
            let mut column = vec![Complex64::new(0.0, 0.0); n];
            for iy in 0..n {
                for ix in 0..n {
                    column[ix] = buf[ix * n + iy];
                }
                plan.process(&mut column);
                for ix in 0..n {
                    buf[ix * n + iy] = column[ix];
                }
            }
        }
    }

    /// Multiply the spectrum by a real per-mode symbol.
    pub fn apply_real_symbol(&self, samples: &[f64], symbol: impl Fn(usize) -> f64) -> Result<Vec<f64>> {
        let mut spec = self.forward(samples)?;
        for (q, c) in spec.iter_mut().enumerate() {
            *c *= symbol(q);
        }
        self.inverse(spec)
    }

    /// `Δf = Σᵢ ∂ᵢ² f`, symbol `−|k|²`.
    pub fn laplacian(&self, samples: &[f64]) -> Result<Vec<f64>> {
        let k2 = self.k2();
        self.apply_real_symbol(samples, |q| -k2[q])
    }

    /// `Δ²f`, symbol `|k|⁴`.
    pub fn bilaplacian(&self, samples: &[f64]) -> Result<Vec<f64>> {
        let k2 = self.k2();
        self.apply_real_symbol(samples, |q| k2[q] * k2[q])
    }

    /// `∂f/∂x_axis`, symbol `i k_axis` with the Nyquist mode removed.
    pub fn partial(&self, samples: &[f64], axis: usize) -> Result<Vec<f64>> {
        if axis >= self.dim() {
            return Err(Error::InvalidArgument(format!("axis {axis} out of range for dimension {}", self.dim())));
        }
        let mut spec = self.forward(samples)?;
        let kd = self.derivative_wavenumbers();
        for (q, c) in spec.iter_mut().enumerate() {
            *c *= Complex64::new(0.0, kd[q][axis]);
        }
        self.inverse(spec)
    }

    /// All first partials of a scalar field.
    pub fn gradient(&self, samples: &[f64]) -> Result<Vec<Vec<f64>>> {
        (0..self.dim()).map(|axis| self.partial(samples, axis)).collect()
    }

    /// Rectangle rule `h^m Σ f`, summed sequentially.
    pub fn integrate(&self, samples: &[f64]) -> Result<f64> {
        self.check_len(samples)?;
        let cell = self.spacing().powi(self.dim() as i32);
        Ok(cell * samples.iter().sum::<f64>())
    }

    /// Mean value `(1/vol) ∫ f`.
    pub fn mean(&self, samples: &[f64]) -> Result<f64> {
        self.check_len(samples)?;
        Ok(samples.iter().sum::<f64>() / self.len() as f64)
    }

    /// `∫ |∇f|²` by Parseval, using `|k|²` on every mode (consistent with `−Δ`).
    pub fn dirichlet_integral(&self, samples: &[f64]) -> Result<f64> {
        let spec = self.forward(samples)?;
        let k2 = self.k2();
        let total = self.len() as f64;
        let sum: f64 = spec.iter().zip(k2).map(|(c, k)| k * c.norm_sqr()).sum();
        Ok(self.volume() * sum / (total * total))
    }
}
