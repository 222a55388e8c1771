mod common;

use common::*;
use histq_core::linalg::{commutator_norm, hermitian_eigendecomposition, ComplexMatrix, C64};
use proptest::prelude::*;

const DERIVED: f64 = 1e-9;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn eigendecomposition_round_trip(seed in any::<u64>(), n in 1usize..=8) {
        let mut r = rng(seed);
        let m = random_hermitian(&mut r, n);
        let es = hermitian_eigendecomposition(&m, 1e-8).unwrap();
        prop_assert!(es.reconstruct().max_abs_diff(&m).unwrap() <= DERIVED);

        let mut sum = ComplexMatrix::zeros(n, n);
        for (i, g) in es.groups.iter().enumerate() {
            sum = &sum + &g.projector;
            for (j, h) in es.groups.iter().enumerate() {
                let prod = &g.projector * &h.projector;
                let expect = if i == j { g.projector.clone() } else { ComplexMatrix::zeros(n, n) };
                prop_assert!(prod.max_abs_diff(&expect).unwrap() <= DERIVED);
            }
        }
        prop_assert!(sum.identity_defect().unwrap() <= DERIVED);
        let vals: Vec<f64> = es.eigenvalues().collect();
        prop_assert!(vals.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn degenerate_spectra_are_grouped(seed in any::<u64>(), n in 2usize..=8) {
        let mut r = rng(seed);
        let u = random_unitary(&mut r, n);
        // two distinct eigenvalues, the first with multiplicity n - 1
        let mut d = vec![2.0; n];
        d[n - 1] = -1.0;
        let m = &(&u * &ComplexMatrix::diagonal(&d)) * &u.adjoint();
        let m = m.hermitian_part().unwrap();
        let es = hermitian_eigendecomposition(&m, 1e-8).unwrap();
        prop_assert_eq!(es.groups.len(), 2);
        prop_assert_eq!(es.groups[0].multiplicity, n - 1);
        prop_assert!((es.groups[1].eigenvalue + 1.0).abs() <= DERIVED);
    }

    #[test]
    fn tensor_product_associative_and_bilinear(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, 2, 2);
        let b = random_matrix(&mut r, 3, 2);
        let c = random_matrix(&mut r, 2, 3);
        prop_assert!(a.kron(&b).kron(&c).max_abs_diff(&a.kron(&b.kron(&c))).unwrap() < 1e-12);

        let b2 = random_matrix(&mut r, 3, 2);
        let s = C64::new(0.3, -1.2);
        let lhs = a.kron(&(&b + &b2.scale(s)));
        let rhs = &a.kron(&b) + &a.kron(&b2).scale(s);
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);

        let x = random_ket(&mut r, 2);
        let y = random_ket(&mut r, 2);
        let lhs = &a.kron(&b) * &x.kron(&y);
        let rhs = a.try_apply(&x).unwrap().kron(&b.try_apply(&y).unwrap());
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
    }

    #[test]
    fn commutator_norm_symmetric(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, n, n);
        let b = random_matrix(&mut r, n, n);
        prop_assert_eq!(commutator_norm(&a, &b).unwrap(), commutator_norm(&b, &a).unwrap());
    }

    #[test]
    fn adjoint_reverses_products(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, n, n);
        let b = random_matrix(&mut r, n, n);
        let lhs = (&a * &b).adjoint();
        let rhs = &b.adjoint() * &a.adjoint();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
    }
}
