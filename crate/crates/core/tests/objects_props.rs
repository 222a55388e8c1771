mod common;

use common::*;
use histq_core::linalg::ComplexMatrix;
use histq_core::objects::{validate_pdi, validate_povm, Isometry, Observable};
use histq_core::Tolerances;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn every_pdi_is_a_povm(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(seed);
        let pdi = validate_pdi(random_pdi(&mut r, n), 1e-10).unwrap();
        let mats = pdi.projectors().iter().map(|p| p.matrix().clone()).collect();
        prop_assert!(validate_povm(mats, 1e-10).is_ok());
    }

    #[test]
    fn pulled_back_pdi_is_a_povm(seed in any::<u64>(), source in 1usize..=6, extra in 0usize..=3) {
        let mut r = rng(seed);
        let target = (source + extra).min(6);
        let j = Isometry::new(random_isometry(&mut r, source, target), 1e-10).unwrap();
        let q: Vec<ComplexMatrix> = random_pdi(&mut r, target)
            .iter()
            .map(|m| j.pull_back(m).unwrap().hermitian_part().unwrap())
            .collect();
        prop_assert!(validate_povm(q, 1e-9).is_ok());
    }

    #[test]
    fn nondegenerate_observable_has_rank_one_spectral_pdi(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(seed);
        let u = random_unitary(&mut r, n);
        let d: Vec<f64> = (0..n).map(|i| i as f64 - 0.5 * n as f64).collect();
        let m = (&(&u * &ComplexMatrix::diagonal(&d)) * &u.adjoint()).hermitian_part().unwrap();
        let obs = Observable::new(m, &Tolerances::default()).unwrap();
        let pdi = obs.spectral_pdi(1e-9).unwrap();
        prop_assert_eq!(pdi.len(), n);
        prop_assert!(pdi.projectors().iter().all(|p| p.rank() == 1));
    }
}
