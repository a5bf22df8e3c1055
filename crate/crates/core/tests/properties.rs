use hyperinv_core::contour::{circle, split_rectangle};
use hyperinv_core::hypotheses::{check_summability, SummabilityOptions};
use hyperinv_core::numkernel::{self, complex_schur, identity, jacobi_svd, svd, ComplexMatrix};
use hyperinv_core::operator::{CompactPerturbation, Term};
use hyperinv_core::projection::{assemble, riesz_of_t};
use hyperinv_core::resolvent::{
    build_a1_a2, build_b, norm_bound_a1, norm_bound_a2, tail_bound, truncate_rows, FactoredCoefficients, Route,
    Tolerances,
};
use hyperinv_core::scenarios::{random_instance, run_scenario, sample_commutant, ContourKind, RandomInstanceOptions};
use hyperinv_core::Complex64;
use proptest::prelude::*;

fn small() -> RandomInstanceOptions {
    RandomInstanceOptions {
        max_atoms: 16,
        max_terms: 4,
        ..RandomInstanceOptions::default()
    }
}

fn kind(rectangle: bool) -> ContourKind {
    if rectangle {
        ContourKind::Rectangle
    } else {
        ContourKind::Circle
    }
}

fn matrix(entries: &[(f64, f64)], rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |i, j| {
        let (re, im) = entries[i * cols + j];
        Complex64::new(re, im)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn assembled_projection_matches_riesz_oracle(seed in 0u64..10_000, rectangle in any::<bool>()) {
        let s = random_instance(seed, kind(rectangle), &small()).unwrap();
        let bundle = s.assemble().unwrap();
        let oracle = riesz_of_t(&s.operator, &s.contour, 256).unwrap();
        let space = s.operator.space();
        let t_norm = space.operator_norm(&s.operator.materialize());
        let gap = space.operator_norm(&(&bundle.p_plus_l - &oracle.matrix));
        prop_assert!(gap <= 1e-8 * (1.0 + t_norm), "gap {gap:e}");
    }

    #[test]
    fn dense_and_factored_routes_agree(seed in 0u64..10_000, angle in 0.0f64..std::f64::consts::TAU) {
        let s = random_instance(seed, ContourKind::Circle, &small()).unwrap();
        let z = Complex64::from_polar(0.5, angle);
        let tol = Tolerances::default();
        let dense = build_b(&s.operator, z, &tol, Route::Dense).unwrap().b;
        let factored = build_b(&s.operator, z, &tol, Route::Factored).unwrap().b;
        let scale = 1.0 + numkernel::spectral_norm(&dense);
        prop_assert!(numkernel::spectral_norm(&(dense - factored)) <= 1e-12 * scale);
    }

    #[test]
    fn hilbert_schmidt_bounds_dominate(seed in 0u64..10_000, re in -1.2f64..1.2, im in -1.2f64..1.2) {
        let options = RandomInstanceOptions { min_atoms: 8, ..small() };
        let s = random_instance(seed, ContourKind::Circle, &options).unwrap();
        let t = &s.operator;
        let z = Complex64::new(re, im);
        let tol = Tolerances::default();
        let coeffs = FactoredCoefficients::symmetric(t);
        let space = t.space();
        let (a1, a2) = build_a1_a2(t, &coeffs, z, &tol).unwrap();
        let n1 = space.operator_norm(&a1).powi(2);
        let n2 = space.operator_norm(&a2).powi(2);
        prop_assert!(n1 <= norm_bound_a1(t, &coeffs, z, &tol).unwrap() * (1.0 + 1e-12));
        prop_assert!(n2 <= norm_bound_a2(t, &coeffs, z, &tol).unwrap() * (1.0 + 1e-12));
        for n in 0..=t.atom_count() {
            let tail = space.operator_norm(&(&a1 - truncate_rows(&a1, n))).powi(2);
            prop_assert!(tail <= tail_bound(t, &coeffs, z, n, &tol).unwrap() * (1.0 + 1e-12) + 1e-300);
        }
    }

    #[test]
    fn tail_bound_is_nonincreasing(seed in 0u64..10_000, re in -1.2f64..1.2, im in -1.2f64..1.2) {
        let s = random_instance(seed, ContourKind::Circle, &small()).unwrap();
        let t = &s.operator;
        let coeffs = FactoredCoefficients::symmetric(t);
        let z = Complex64::new(re, im);
        let tol = Tolerances::default();
        let tails: Vec<f64> = (0..=t.atom_count() + 1)
            .map(|n| tail_bound(t, &coeffs, z, n, &tol).unwrap())
            .collect();
        prop_assert!(tails.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(*tails.last().unwrap(), 0.0);
    }

    #[test]
    fn commutant_samples_commute_and_are_reproducible(seed in 0u64..10_000) {
        let s = random_instance(seed, ContourKind::Circle, &small()).unwrap();
        let samples = sample_commutant(&s.operator, &s.options.commutant, seed).unwrap();
        prop_assert!(samples.len() >= 10);
        for sample in &samples {
            prop_assert!(sample.construction_residual <= 1e-10);
        }
        let again = sample_commutant(&s.operator, &s.options.commutant, seed).unwrap();
        prop_assert_eq!(samples, again);
    }

    #[test]
    fn pipeline_is_deterministic(seed in 0u64..10_000, rectangle in any::<bool>()) {
        let s = random_instance(seed, kind(rectangle), &small()).unwrap();
        let first = run_scenario(&s);
        let second = run_scenario(&s);
        prop_assert!(first.all_pass());
        prop_assert_eq!(first, second);
    }

    #[test]
    fn adding_a_term_never_decreases_summability_sums(seed in 0u64..10_000) {
        let s = random_instance(seed, ContourKind::Circle, &small()).unwrap();
        let t = &s.operator;
        let options = SummabilityOptions::default();
        let before = check_summability(t, &FactoredCoefficients::symmetric(t), &options);
        let extra = Term { s: 0.01, u: t.perturbation().terms()[0].v.clone(), v: t.perturbation().terms()[0].u.clone() };
        let grown = t
            .with_perturbation(t.perturbation().union(&CompactPerturbation::new(vec![extra], t.atom_count()).unwrap()))
            .unwrap();
        let after = check_summability(&grown, &FactoredCoefficients::symmetric(&grown), &options);
        prop_assert!(after.sum1 >= before.sum1);
        prop_assert!(after.sum2 >= before.sum2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn svd_reconstructs(entries in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 30), rows in 1usize..=6) {
        let cols = if rows == 6 { 5 } else { 6 };
        let m = matrix(&entries, rows, cols);
        for d in [svd(&m).unwrap(), jacobi_svd(&m).unwrap()] {
            let scale = m.norm().max(f64::MIN_POSITIVE);
            prop_assert!((d.reconstruct() - &m).norm() <= 1e-13 * scale);
            let k = d.right_vectors.ncols();
            prop_assert!((d.right_vectors.adjoint() * &d.right_vectors - identity(k)).norm() <= 1e-13);
        }
    }

    #[test]
    fn complex_schur_is_unitary_and_triangular(entries in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 36)) {
        let m = matrix(&entries, 6, 6);
        let (q, u) = complex_schur(&m).unwrap();
        prop_assert!((q.adjoint() * &q - identity(6)).norm() <= 1e-13);
        prop_assert!((&q * &u * q.adjoint() - &m).norm() <= 1e-13 * (1.0 + m.norm()));
        for j in 0..6 {
            for i in (j + 1)..6 {
                prop_assert_eq!(u[(i, j)], Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn quadrature_integrates_monomials(power in 0i32..12, x0 in -2.0f64..2.0, rho in 0.0f64..1.0) {
        // ∮ zᵏ dz = 0 for k ≠ −1, and ∮ dz/(z − w) = 2πi for w inside.
        let shapes = [
            (circle(Complex64::new(x0, 0.3), 0.7).unwrap(), Complex64::new(x0, 0.3)),
            (split_rectangle(x0, rho).unwrap(), Complex64::new(x0 - 0.5 * (rho + 1.0), 0.0)),
        ];
        for (contour, inside) in shapes {
            let rule = contour.quadrature(64).unwrap();
            let value = rule.integrate(|z| z.powi(power));
            prop_assert!(value.norm() <= 1e-11 * (1.0 + contour.scale()).powi(power + 1));
            let cauchy = rule.integrate(|z| 1.0 / (z - inside));
            let expected = Complex64::new(0.0, std::f64::consts::TAU);
            prop_assert!((cauchy - expected).norm() <= 1e-9, "{cauchy} around {inside}");
            prop_assert_eq!(contour.winding_number(inside).unwrap(), 1);
        }
    }

    #[test]
    fn assembly_without_terms_returns_the_symbol_projection(seed in 0u64..10_000) {
        let s = random_instance(seed, ContourKind::Circle, &small()).unwrap();
        let bare = s.operator.with_perturbation(CompactPerturbation::empty()).unwrap();
        let bundle = assemble(&bare, &s.contour, &s.options.assembly).unwrap();
        prop_assert_eq!(&bundle.p_plus_l, &bundle.p);
        for (i, f) in bare.symbol().iter().enumerate() {
            let inside = s.contour.contains(*f).unwrap();
            prop_assert_eq!(bundle.p[(i, i)].re, if inside { 1.0 } else { 0.0 });
        }
    }
}
