//! Property tests over random smooth fields and random gauge rotations.

use std::f64::consts::PI;

use mflow_core::entropy::{entropy_value, evolve_f, AdjointSign, EntropyState};
use mflow_core::flow::{assemble_rhs, step_etd1};
use mflow_core::functionals::moduli_energy;
use mflow_core::tensor_field::moduli_distance;
use mflow_core::willmore::willmore_energy;
use mflow_core::{init, AmbientModel, FlowCoefficients, FlowState, GaugeRotation, Grid, SymMatrix, SymTensorField};
use proptest::prelude::*;

fn grid() -> Grid {
    Grid::new(2, 16, 2.0 * PI).unwrap()
}

fn field(seed: u64, amplitude: f64) -> SymTensorField {
    init::random_smooth(&grid(), seed, 3, amplitude).unwrap()
}

fn gauge() -> impl Strategy<Value = GaugeRotation> {
    (0.0..2.0 * PI, any::<bool>()).prop_map(|(angle, flip)| {
        let r = GaugeRotation::rotation(angle).rows();
        if flip {
            GaugeRotation::new(2, [[r[0][0], -r[0][1]], [r[1][0], -r[1][1]]]).unwrap()
        } else {
            GaugeRotation::rotation(angle)
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn functionals_are_gauge_invariant(seed in 0u64..1000, g in gauge()) {
        let a = field(seed, 1.0);
        let b = a.conjugate(&g).unwrap();
        prop_assert!((moduli_energy(&a) - moduli_energy(&b)).abs() <= 1e-10 * (1.0 + moduli_energy(&a)));
        prop_assert!((willmore_energy(&a) - willmore_energy(&b)).abs() <= 1e-10 * (1.0 + willmore_energy(&a)));
        let s = EntropyState::uniform(a.grid(), 2.0, 0.5).unwrap();
        let (wa, wb) = (entropy_value(&a, &s).unwrap(), entropy_value(&b, &s).unwrap());
        prop_assert!((wa - wb).abs() <= 1e-10 * (1.0 + wa.abs()));
        prop_assert!(moduli_distance(&a, &b).unwrap() <= 1e-10);
    }

    #[test]
    fn moduli_distance_is_a_pseudometric(s1 in 0u64..500, s2 in 500u64..1000, s3 in 1000u64..1500) {
        let (a, b, c) = (field(s1, 1.0), field(s2, 1.0), field(s3, 1.0));
        let ab = moduli_distance(&a, &b).unwrap();
        prop_assert_eq!(moduli_distance(&a, &a).unwrap(), 0.0);
        prop_assert!((ab - moduli_distance(&b, &a).unwrap()).abs() <= 1e-14 * (1.0 + ab));
        let ac = moduli_distance(&a, &c).unwrap();
        let bc = moduli_distance(&b, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
        // Sorted-eigenvalue distance never exceeds the L² distance of the representatives.
        prop_assert!(ab <= a.sub(&b).unwrap().l2_norm() + 1e-12);
    }

    #[test]
    fn flow_rhs_is_gauge_equivariant(seed in 0u64..1000, g in gauge(), c in -1.0f64..=0.0, adjusted in any::<bool>()) {
        let a = field(seed, 0.3);
        let amb = AmbientModel::new(c, adjusted).unwrap();
        let coeffs = FlowCoefficients::default();
        let lhs = assemble_rhs(&a, &amb, &coeffs).unwrap().conjugate(&g).unwrap();
        let rhs = assemble_rhs(&a.conjugate(&g).unwrap(), &amb, &coeffs).unwrap();
        let scale = 1.0 + lhs.sup_norm();
        prop_assert!(lhs.sub(&rhs).unwrap().sup_norm() <= 1e-11 * scale);
    }

    #[test]
    fn trace_and_symmetry_preserved_by_products(seed in 0u64..1000, p in 1u32..5) {
        let a = field(seed, 1.0);
        let ap = a.matrix_power(p).unwrap();
        // Powers commute with their base, so A·Aᵖ symmetrized equals Aᵖ⁺¹.
        let next = a.sym_product(&ap).unwrap();
        let direct = a.matrix_power(p + 1).unwrap();
        prop_assert!(next.sub(&direct).unwrap().sup_norm() <= 1e-12 * (1.0 + direct.sup_norm()));
        let tr: f64 = a.trace().iter().sum();
        let sum_eig: f64 = a.eigenvalue_fields().iter().map(|e| e.iter().sum::<f64>()).sum();
        prop_assert!((tr - sum_eig).abs() <= 1e-10 * (1.0 + tr.abs()));
    }

    #[test]
    fn etd_step_is_gauge_equivariant(seed in 0u64..1000, g in gauge(), dt in 1e-4f64..1e-2) {
        let a = field(seed, 0.1);
        let amb = AmbientModel::new(-1.0, true).unwrap();
        let coeffs = FlowCoefficients::default();
        let lhs = step_etd1(&FlowState::new(a.clone()), dt, &amb, &coeffs).unwrap().a.conjugate(&g).unwrap();
        let rhs = step_etd1(&FlowState::new(a.conjugate(&g).unwrap()), dt, &amb, &coeffs).unwrap().a;
        prop_assert!(lhs.sub(&rhs).unwrap().sup_norm() <= 1e-13);
    }

    #[test]
    fn weight_stays_normalized(seed in 0u64..1000, dt in 1e-3f64..0.2) {
        let a = field(seed, 0.5);
        let s = EntropyState::uniform(a.grid(), 1.0, 0.0).unwrap();
        let next = evolve_f(&s, &a, dt, AdjointSign::Diffusive).unwrap();
        prop_assert!(next.last_norm_error <= 1e-9);
        prop_assert!(next.u.iter().all(|u| *u > 0.0));
    }
}

#[test]
fn parallel_tensors_are_stationary_only_for_vanishing_reaction() {
    // Constant A with θ₄ = 0 and flat ambient: R(A) = 0, so A is a fixed point.
    let g = grid();
    let a = SymTensorField::constant(&g, SymMatrix::from_entries(2, &[0.3, -0.1, 0.2]).unwrap()).unwrap();
    let coeffs = FlowCoefficients::new([1.0, 1.0, 1.0, 0.0, 1.0]).unwrap();
    let rhs = assemble_rhs(&a, &AmbientModel::flat(), &coeffs).unwrap();
    assert!(rhs.sup_norm() < 1e-14);
    // With θ₄ ≠ 0 the pointwise A⁴ term moves it.
    let rhs = assemble_rhs(&a, &AmbientModel::flat(), &FlowCoefficients::default()).unwrap();
    assert!(rhs.sup_norm() > 1e-3);
}
