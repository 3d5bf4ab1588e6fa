//! Symmetric (1,1)-tensor fields, their pointwise algebra, and the gauge action.
//!
//! On a flat grid with the Euclidean frame, a symmetric (1,1)-tensor is a
//! symmetric matrix per point. Only the upper triangle is stored:
//! `m = 1 → [a11]`, `m = 2 → [a11, a12, a22]`.

use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::Grid;

/// A symmetric `m × m` matrix, `m ∈ {1, 2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    e: [f64; 3],
}

/// Serialized as its stored entries: `[a11]` or `[a11, a12, a22]`.
impl serde::Serialize for SymMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.entries())
    }
}

/// Number of stored components for dimension `m`.
pub fn component_count(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Frobenius weight of each stored component (off-diagonals count twice).
pub fn frobenius_weights(dim: usize) -> &'static [f64] {
    if dim == 1 {
        &[1.0]
    } else {
        &[1.0, 2.0, 1.0]
    }
}

impl SymMatrix {
    pub fn zero(dim: usize) -> Self {
        assert!(dim == 1 || dim == 2, "dimension must be 1 or 2");
        Self { dim, e: [0.0; 3] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, 1.0)
    }

    pub fn scalar(dim: usize, s: f64) -> Self {
        let mut m = Self::zero(dim);
        m.e[0] = s;
        if dim == 2 {
            m.e[2] = s;
        }
        m
    }

    /// Build from stored (upper-triangle) entries.
    pub fn from_entries(dim: usize, entries: &[f64]) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidArgument(format!("dimension must be 1 or 2, got {dim}")));
        }
        if entries.len() != component_count(dim) {
            return Err(Error::InvalidArgument(format!(
                "expected {} entries for m = {dim}, got {}",
                component_count(dim),
                entries.len()
            )));
        }
        let mut m = Self::zero(dim);
        m.e[..entries.len()].copy_from_slice(entries);
        Ok(m)
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Self { dim: 2, e: [a, 0.0, b] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.e[..component_count(self.dim)]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (self.dim, i.min(j), i.max(j)) {
            (1, 0, 0) => self.e[0],
            (2, 0, 0) => self.e[0],
            (2, 0, 1) => self.e[1],
            (2, 1, 1) => self.e[2],
            _ => panic!("index ({i}, {j}) out of range for m = {}", self.dim),
        }
    }

    fn full(&self) -> [[f64; 2]; 2] {
        if self.dim == 1 {
            [[self.e[0], 0.0], [0.0, 0.0]]
        } else {
            [[self.e[0], self.e[1]], [self.e[1], self.e[2]]]
        }
    }

    fn from_full_symmetrized(dim: usize, m: [[f64; 2]; 2]) -> Self {
        if dim == 1 {
            Self { dim, e: [m[0][0], 0.0, 0.0] }
        } else {
            Self { dim, e: [m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]] }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = *self;
        for (a, b) in out.e.iter_mut().zip(other.e) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for a in out.e.iter_mut() {
            *a *= s;
        }
        out
    }

    pub fn trace(&self) -> f64 {
        if self.dim == 1 {
            self.e[0]
        } else {
            self.e[0] + self.e[2]
        }
    }

    /// Frobenius inner product `tr(AB)`.
    pub fn dot(&self, other: &Self) -> f64 {
        frobenius_weights(self.dim)
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.e[i] * other.e[i])
            .sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.dot(self)
    }

    /// Symmetrized product `(AB + BA)/2`.
    pub fn sym_product(&self, other: &Self) -> Self {
        if self.dim == 1 {
            return Self { dim: 1, e: [self.e[0] * other.e[0], 0.0, 0.0] };
        }
        let [a, b, d] = self.e;
        let [p, q, s] = other.e;
        // AB = [[ap + bq, aq + bs], [bp + dq, bq + ds]]; the symmetric part averages the off-diagonals.
        Self {
            dim: 2,
            e: [a * p + b * q, 0.5 * (a * q + b * s + b * p + d * q), b * q + d * s],
        }
    }

    pub fn square(&self) -> Self {
        self.sym_product(self)
    }

    pub fn pow(&self, p: u32) -> Self {
        assert!(p >= 1);
        let mut acc = *self;
        for _ in 1..p {
            acc = acc.sym_product(self);
        }
        acc
    }

    /// `RᵀAR` for an orthogonal `R` (rows of `r` are matrix rows).
    pub fn conjugate(&self, r: &[[f64; 2]; 2]) -> Self {
        if self.dim == 1 {
            return Self { dim: 1, e: [r[0][0] * r[0][0] * self.e[0], 0.0, 0.0] };
        }
        let a = self.full();
        let mut ar = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                ar[i][j] = a[i][0] * r[0][j] + a[i][1] * r[1][j];
            }
        }
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = r[0][i] * ar[0][j] + r[1][i] * ar[1][j];
            }
        }
        Self::from_full_symmetrized(2, out)
    }

    /// Ascending eigenvalues; for `m = 1` both slots hold the single value.
    pub fn eigenvalues(&self) -> [f64; 2] {
        if self.dim == 1 {
            return [self.e[0], self.e[0]];
        }
        let [a, b, d] = self.e;
        let mid = 0.5 * (a + d);
        let rad = (0.5 * (a - d)).hypot(b);
        [mid - rad, mid + rad]
    }

    pub fn is_finite(&self) -> bool {
        self.e.iter().all(|v| v.is_finite())
    }
}

/// Constant orthogonal gauge transformation `R`, acting by `A ↦ R⁻¹AR = RᵀAR`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeRotation {
    dim: usize,
    r: [[f64; 2]; 2],
}

impl GaugeRotation {
    pub fn new(dim: usize, rows: [[f64; 2]; 2]) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidArgument(format!("dimension must be 1 or 2, got {dim}")));
        }
        let mut dev: f64 = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                let rtr: f64 = (0..dim).map(|k| rows[k][i] * rows[k][j]).sum();
                let id = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((rtr - id).abs());
            }
        }
        if !(dev <= 1e-12) {
            return Err(Error::NotOrthogonal(dev));
        }
        Ok(Self { dim, r: rows })
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, r: [[1.0, 0.0], [0.0, if dim == 2 { 1.0 } else { 0.0 }]] }
    }

    /// Planar rotation by `angle` (m = 2).
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { dim: 2, r: [[c, -s], [s, c]] }
    }

    /// Reflection `diag(1, −1)` (m = 2) or `−1` (m = 1).
    pub fn reflection(dim: usize) -> Self {
        if dim == 1 {
            Self { dim: 1, r: [[-1.0, 0.0], [0.0, 0.0]] }
        } else {
            Self { dim: 2, r: [[1.0, 0.0], [0.0, -1.0]] }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> [[f64; 2]; 2] {
        self.r
    }
}

/// Symmetric tensor field sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    grid: Grid,
    comps: Vec<Vec<f64>>,
}

impl SymTensorField {
    pub fn zeros(grid: &Grid) -> Self {
        let d = component_count(grid.dim());
        Self { grid: grid.clone(), comps: vec![vec![0.0; grid.len()]; d] }
    }

    pub fn from_components(grid: &Grid, comps: Vec<Vec<f64>>) -> Result<Self> {
        let d = component_count(grid.dim());
        if comps.len() != d {
            return Err(Error::InvalidArgument(format!("expected {d} components, got {}", comps.len())));
        }
        for c in &comps {
            grid.check_len(c)?;
        }
        Self { grid: grid.clone(), comps }.finite("from_components")
    }

    pub fn constant(grid: &Grid, value: SymMatrix) -> Result<Self> {
        if value.dim() != grid.dim() {
            return Err(Error::InvalidArgument("matrix dimension does not match grid".into()));
        }
        Self::from_fn(grid, |_, _| value)
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> SymMatrix) -> Result<Self> {
        let points: Vec<SymMatrix> = (0..grid.len())
            .map(|p| {
                let [x, y] = grid.coords(p);
                f(x, y)
            })
            .collect();
        Self::from_points(grid, &points)
    }

    /// Field whose single stored component `component` equals `samples`.
    pub fn from_component(grid: &Grid, component: usize, samples: Vec<f64>) -> Result<Self> {
        let d = component_count(grid.dim());
        if component >= d {
            return Err(Error::InvalidArgument(format!("component {component} out of range (< {d})")));
        }
        grid.check_len(&samples)?;
        let mut out = Self::zeros(grid);
        out.comps[component] = samples;
        out.finite("from_component")
    }

    fn from_points(grid: &Grid, points: &[SymMatrix]) -> Result<Self> {
        let d = component_count(grid.dim());
        let mut comps = vec![Vec::with_capacity(grid.len()); d];
        for m in points {
            for (c, v) in comps.iter_mut().zip(m.entries()) {
                c.push(*v);
            }
        }
        Self { grid: grid.clone(), comps }.finite("pointwise map")
    }

    fn finite(self, what: &'static str) -> Result<Self> {
        if self.comps.iter().all(|c| c.iter().all(|v| v.is_finite())) {
            Ok(self)
        } else {
            Err(Error::NonFinite(what))
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.comps
    }

    pub fn at(&self, p: usize) -> SymMatrix {
        let mut m = SymMatrix::zero(self.dim());
        for (i, c) in self.comps.iter().enumerate() {
            m.e[i] = c[p];
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Apply a pointwise map.
    pub fn map(&self, f: impl Fn(SymMatrix) -> SymMatrix + Sync + Send) -> Result<Self> {
        let points = exec::map_points(self.grid.len(), |p| f(self.at(p)));
        Self::from_points(&self.grid, &points)
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(SymMatrix, SymMatrix) -> SymMatrix + Sync + Send) -> Result<Self> {
        self.same_grid(other)?;
        let points = exec::map_points(self.grid.len(), |p| f(self.at(p), other.at(p)));
        Self::from_points(&self.grid, &points)
    }

    /// Componentwise map over stored components (linear operators act this way).
    pub fn map_components(&self, f: impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<Self> {
        let comps = self.comps.iter().map(|c| f(c)).collect::<Result<Vec<_>>>()?;
        Self { grid: self.grid.clone(), comps }.finite("componentwise map")
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + s * y).collect())
            .collect();
        Self { grid: self.grid.clone(), comps }.finite("axpy")
    }

    pub fn scale(&self, s: f64) -> Result<Self> {
        let comps = self.comps.iter().map(|c| c.iter().map(|v| s * v).collect()).collect();
        Self { grid: self.grid.clone(), comps }.finite("scale")
    }

    /// Pointwise `(AB + BA)/2`.
    pub fn sym_product(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a.sym_product(&b))
    }

    /// Pointwise matrix power `Aᵖ`, `p ≥ 1`.
    pub fn matrix_power(&self, p: u32) -> Result<Self> {
        if p < 1 {
            return Err(Error::InvalidPower(p));
        }
        self.map(move |a| a.pow(p))
    }

    /// Pointwise trace (the mean-curvature function `H = tr A`).
    pub fn trace(&self) -> Vec<f64> {
        if self.dim() == 1 {
            self.comps[0].clone()
        } else {
            self.comps[0].iter().zip(&self.comps[2]).map(|(a, d)| a + d).collect()
        }
    }

    /// `s·Id` for a scalar field `s`.
    pub fn identity_scale(grid: &Grid, s: &[f64]) -> Result<Self> {
        grid.check_len(s)?;
        let mut out = Self::zeros(grid);
        out.comps[0] = s.to_vec();
        if grid.dim() == 2 {
            out.comps[2] = s.to_vec();
        }
        out.finite("identity_scale")
    }

    /// Pointwise `RᵀAR`.
    pub fn conjugate(&self, r: &GaugeRotation) -> Result<Self> {
        if r.dim() != self.dim() {
            return Err(Error::InvalidArgument("gauge dimension does not match field".into()));
        }
        let rows = r.rows();
        self.map(move |a| a.conjugate(&rows))
    }

    /// Pointwise ascending eigenvalue fields (one field per eigenvalue slot).
    pub fn eigenvalue_fields(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut out = vec![Vec::with_capacity(self.grid.len()); d];
        for p in 0..self.grid.len() {
            let ev = self.at(p).eigenvalues();
            for (slot, v) in out.iter_mut().zip(ev) {
                slot.push(v);
            }
        }
        out
    }

    /// Pointwise `|A|²_F`.
    pub fn frobenius_sq(&self) -> Vec<f64> {
        let w = frobenius_weights(self.dim());
        (0..self.grid.len())
            .map(|p| self.comps.iter().zip(w).map(|(c, w)| w * c[p] * c[p]).sum())
            .collect()
    }

    /// Pointwise Frobenius inner product `⟨A, B⟩`.
    pub fn pointwise_dot(&self, other: &Self) -> Result<Vec<f64>> {
        self.same_grid(other)?;
        let w = frobenius_weights(self.dim());
        Ok((0..self.grid.len())
            .map(|p| {
                self.comps
                    .iter()
                    .zip(&other.comps)
                    .zip(w)
                    .map(|((a, b), w)| w * a[p] * b[p])
                    .sum()
            })
            .collect())
    }

    /// L² inner product `∫ ⟨A, B⟩_F`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        let dots = self.pointwise_dot(other)?;
        self.grid.integrate(&dots)
    }

    pub fn l2_norm(&self) -> f64 {
        self.grid.integrate(&self.frobenius_sq()).expect("own grid").max(0.0).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.frobenius_sq().into_iter().fold(0.0, f64::max).sqrt()
    }

    /// `√∫ Σᵢ |∂ᵢA|²_F`, computed spectrally.
    pub fn gradient_l2_norm(&self) -> f64 {
        self.dirichlet_integral().max(0.0).sqrt()
    }

    /// `∫ Σᵢ |∂ᵢA|²_F` by Parseval.
    pub fn dirichlet_integral(&self) -> f64 {
        let w = frobenius_weights(self.dim());
        self.comps
            .iter()
            .zip(w)
            .map(|(c, w)| w * self.grid.dirichlet_integral(c).expect("own grid"))
            .sum()
    }

    /// Pointwise mean over the domain, as a matrix.
    pub fn mean(&self) -> SymMatrix {
        let mut m = SymMatrix::zero(self.dim());
        for (i, c) in self.comps.iter().enumerate() {
            m.e[i] = self.grid.mean(c).expect("own grid");
        }
        m
    }

    pub fn laplacian(&self) -> Result<Self> {
        self.map_components(|c| self.grid.laplacian(c))
    }

    pub fn bilaplacian(&self) -> Result<Self> {
        self.map_components(|c| self.grid.bilaplacian(c))
    }

    /// `∂_axis A`, componentwise.
    pub fn partial(&self, axis: usize) -> Result<Self> {
        self.map_components(|c| self.grid.partial(c, axis))
    }

    /// Pointwise `Σᵢ |∂ᵢA|²_F` from spatial derivative fields.
    pub fn gradient_density(&self) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; self.grid.len()];
        for axis in 0..self.dim() {
            let d = self.partial(axis)?;
            for (a, v) in acc.iter_mut().zip(d.frobenius_sq()) {
                *a += v;
            }
        }
        Ok(acc)
    }
}

/// L² distance between pointwise ascending eigenvalue vectors.
///
/// Depends only on the conjugacy classes, so it is a pseudometric on the moduli
/// quotient: zero iff the fields are pointwise orthogonally conjugate.
pub fn moduli_distance(a: &SymTensorField, b: &SymTensorField) -> Result<f64> {
    a.same_grid(b)?;
    let d = a.dim();
    let density: Vec<f64> = (0..a.grid.len())
        .map(|p| {
            let ea = a.at(p).eigenvalues();
            let eb = b.at(p).eigenvalues();
            (0..d).map(|i| (ea[i] - eb[i]).powi(2)).sum()
        })
        .collect();
    Ok(a.grid.integrate(&density)?.max(0.0).sqrt())
}
