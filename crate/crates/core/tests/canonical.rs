//! The two-atom instance `T = [[0, 1], [0, 2]]` with the unit circle, checked
//! against values worked out by hand from residues and eigenvectors.

use hyperinv_core::contour::circle;
use hyperinv_core::numkernel::{from_real_rows, ComplexMatrix};
use hyperinv_core::projection::{assemble, AssemblyOptions};
use hyperinv_core::resolvent::{build_b, invertibility_certificate, build_a, Route, Tolerances};
use hyperinv_core::scenarios::{
    canonical_scenario, eigenvalue_on_contour_scenario, run_scenario, unperturbed_scenario,
};
use hyperinv_core::{Complex64, Error};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `B(z)₀₁ = −1/(z(2 − z))`: the only nonzero entry of `(T − z)⁻¹ − (M_f − z)⁻¹`.
fn b01_oracle(z: Complex64) -> Complex64 {
    -1.0 / (z * (2.0 - z))
}

#[test]
fn b_matches_residue_oracle_at_nodes_on_both_routes() {
    let s = canonical_scenario().unwrap();
    let rule = s.contour.quadrature(64).unwrap();
    for z in rule.nodes.iter().step_by(7) {
        for route in [Route::Dense, Route::Factored] {
            let b = build_b(&s.operator, *z, &Tolerances::default(), route).unwrap().b;
            assert!((b[(0, 1)] - b01_oracle(*z)).norm() < 1e-12, "{route:?} at {z}");
            for (i, j) in [(0, 0), (1, 0), (1, 1)] {
                assert!(b[(i, j)].norm() < 1e-15);
            }
        }
    }
}

#[test]
fn certificate_at_one_is_inverse_golden_ratio() {
    let s = canonical_scenario().unwrap();
    let z = c(1.0, 0.0);
    let a = build_a(&s.operator, z, &Tolerances::default()).unwrap();
    let expected_a = from_real_rows(&[&[0.0, -1.0], &[0.0, 0.0]]);
    assert!((&a - expected_a).norm() < 1e-15);
    // I + A(1)(M_f − 1) = [[1, −1], [0, 1]] has singular values (√5 ± 1)/2.
    let sigma = invertibility_certificate(&s.operator, z, &a).unwrap();
    assert!((sigma - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-14);
}

#[test]
fn assembled_l_and_projection_match_hand_values() {
    let s = canonical_scenario().unwrap();
    let bundle = assemble(&s.operator, &s.contour, &AssemblyOptions::default()).unwrap();
    let l = from_real_rows(&[&[0.0, -0.5], &[0.0, 0.0]]);
    let pl = from_real_rows(&[&[1.0, -0.5], &[0.0, 0.0]]);
    assert!((&bundle.l - l).norm() < 1e-10);
    assert!((&bundle.p_plus_l - pl).norm() < 1e-10);
    assert!((&bundle.p - from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]])).norm() == 0.0);
}

#[test]
fn canonical_pipeline_passes_with_span_of_first_atom() {
    let s = canonical_scenario().unwrap();
    let outcome = run_scenario(&s);
    assert!(outcome.all_pass(), "{:?}", outcome.verification.as_ref().map(|v| v.failures()));
    let report = outcome.verification.unwrap();
    for key in ["oracle_gap", "idempotency", "spectrum_01", "right_inverse"] {
        assert!(report.checks[key].value <= 1e-10, "{key} = {}", report.checks[key].value);
    }
    assert!(report.max_value("commutation").unwrap() <= 1e-10);
    assert!(report.max_value("invariance").unwrap() <= 1e-10);
    let basis = outcome.subspace.unwrap().unwrap();
    assert_eq!(basis.dimension, 1);
    assert!(basis.basis[(1, 0)].norm() < 1e-12);
    assert!((basis.basis[(0, 0)].norm() - 1.0).abs() < 1e-12);
}

#[test]
fn unperturbed_instance_reproduces_p_exactly() {
    let s = unperturbed_scenario().unwrap();
    let outcome = run_scenario(&s);
    assert!(outcome.all_pass());
    let bundle = outcome.bundle.unwrap();
    assert_eq!(bundle.l, ComplexMatrix::zeros(2, 2));
    assert_eq!(bundle.p_plus_l, bundle.p);
    let report = outcome.verification.unwrap();
    for (key, check) in &report.checks {
        if key != "subspace_nontrivial" {
            assert!(check.value <= 1e-13, "{key} = {}", check.value);
        }
    }
}

#[test]
fn contour_through_eigenvalue_names_node_zero() {
    let s = eigenvalue_on_contour_scenario().unwrap();
    assert_eq!(s.contour.quadrature(64).unwrap().nodes[0], c(1.0, 0.0));
    let outcome = run_scenario(&s);
    match outcome.bundle {
        Err(Error::NearSingular { node, .. }) => assert_eq!(node, Some(0)),
        other => panic!("expected a near-singular node, got {other:?}"),
    }
    assert!(outcome.verification.is_none());
    assert!(!outcome.hypotheses.all_pass());
}

#[test]
fn canonical_contour_is_the_unit_circle() {
    let s = canonical_scenario().unwrap();
    assert_eq!(s.contour, circle(c(0.0, 0.0), 1.0).unwrap());
}
