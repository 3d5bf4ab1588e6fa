//! Moduli flow laboratory.
//!
//! Symmetric (1,1)-tensor fields on flat periodic grids evolved by the
//! fourth-order flow `∂ₜA = −Δ²A + R(A, ∇A, ∇²A)`, together with the energy,
//! entropy, linear-stability and Willmore-baseline diagnostics built around it.
//!
//! Sign convention: `Δ = Σᵢ ∂ᵢ²` throughout (Fourier symbol `−|k|²`), so the
//! principal part `−Δ²` has symbol `−|k|⁴` and is dissipative.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod entropy;
pub mod error;
pub mod exec;
pub mod flow;
pub mod functionals;
pub mod geometry;
pub mod init;
pub mod stability;
pub mod tensor_field;
pub mod willmore;

pub use error::{Error, Result};
pub use flow::{AmbientModel, FlowCoefficients, FlowState, Schedule};
pub use functionals::DiagnosticsRecord;
pub use geometry::Grid;
pub use tensor_field::{GaugeRotation, SymMatrix, SymTensorField};
