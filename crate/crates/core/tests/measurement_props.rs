mod common;

use common::*;
use histq_core::histories::{InitialState, Layout};
use histq_core::linalg::ComplexMatrix;
use histq_core::measurement::{
    backwards_map, derive_povm, inference_family, kraus_model, projective_model, KrausSet, MeasurementModel,
};
use histq_core::objects::{index_labels, Isometry, Projector};
use histq_core::Tolerances;
use proptest::prelude::*;
use rand::Rng;

const DERIVED: f64 = 1e-9;

/// Random isometry with a random PDI on its target as the pointer.
fn random_model(r: &mut impl Rng, ds: usize, dm: usize) -> MeasurementModel {
    let tol = Tolerances::default();
    let j = Isometry::new(random_isometry(r, ds, dm), 1e-10).unwrap();
    let pdi = random_pdi(r, dm);
    let pointer = index_labels(pdi.len()).into_iter().zip(pdi).collect();
    MeasurementModel::new(j, Layout::simple(ds), Layout::simple(dm), pointer, &tol).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn backwards_map_yields_povm(seed in any::<u64>(), ds in 1usize..=4, extra in 0usize..=3) {
        let mut r = rng(seed);
        let model = random_model(&mut r, ds, ds + extra);
        let povm = derive_povm(&model, &Tolerances::default()).unwrap();
        prop_assert_eq!(povm.len(), model.pointer().len());
        let mut sum = ComplexMatrix::zeros(ds, ds);
        for (_, q) in povm.iter() {
            sum = &sum + q;
        }
        prop_assert!(sum.identity_defect().unwrap() <= DERIVED);
    }

    #[test]
    fn projective_models_recover_their_basis(seed in any::<u64>(), ds in 1usize..=4, extra in 0usize..=2) {
        let mut r = rng(seed);
        let tol = Tolerances::default();
        let dm = ds + extra;
        let basis = random_orthonormal(&mut r, ds, ds);
        let images = random_orthonormal(&mut r, dm, ds);
        let pairs: Vec<_> = basis.iter().cloned().zip(images.iter().cloned()).collect();
        let pointer = images.iter().enumerate().map(|(i, phi)| (format!("M{i}"), phi.projector())).collect();
        let model = projective_model(&pairs, pointer, &tol).unwrap();
        for (i, s) in basis.iter().enumerate() {
            let q = backwards_map(&model, &format!("M{i}")).unwrap();
            prop_assert!(q.max_abs_diff(&s.projector()).unwrap() <= DERIVED);
        }
        prop_assert!(backwards_map(&model, "0").unwrap().max_abs() <= DERIVED);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn inference_families_are_consistent(seed in any::<u64>(), ds in 1usize..=3, extra in 0usize..=3) {
        let mut r = rng(seed);
        let tol = Tolerances::default();
        let model = random_model(&mut r, ds, ds + extra);
        let psi = random_ket(&mut r, ds);
        let inf = inference_family(&model, &InitialState::Pure(psi.clone()), &tol).unwrap();
        prop_assert!(inf.table.normative);
        prop_assert!((inf.table.total() - 1.0).abs() <= DERIVED);
        for res in &inf.results {
            let born = psi.expectation(&res.q).unwrap().re;
            prop_assert!((res.outcome_probability - born).abs() <= DERIVED);
            if let Some(dist) = &res.prior_distribution {
                let s: f64 = dist.iter().map(|(_, p)| p).sum();
                prop_assert!((s - 1.0).abs() <= DERIVED);
            }
        }
    }

    #[test]
    fn ensemble_outcomes_match_trace_rule(seed in any::<u64>(), ds in 2usize..=3, extra in 0usize..=2) {
        let mut r = rng(seed);
        let tol = Tolerances::default();
        let model = random_model(&mut r, ds, ds + extra);
        let w: f64 = r.gen_range(0.05..0.95);
        let state = InitialState::Ensemble(vec![(w, random_ket(&mut r, ds)), (1.0 - w, random_ket(&mut r, ds))]);
        let rho = state.density_matrix();
        let inf = inference_family(&model, &state, &tol).unwrap();
        for res in &inf.results {
            let tr = rho.try_mul(&res.q).unwrap().trace().re;
            prop_assert!((res.outcome_probability - tr).abs() <= DERIVED);
            let direct = model.outcome_probability(&state, &res.outcome).unwrap();
            prop_assert!((direct - tr).abs() <= DERIVED);
        }
    }

    #[test]
    fn kraus_models_reproduce_kraus_povm(seed in any::<u64>(), ds in 1usize..=3, count in 1usize..=3) {
        let mut r = rng(seed);
        let tol = Tolerances::default();
        let ops = random_kraus(&mut r, ds, count);
        let set = KrausSet::new(index_labels(count), ops.clone(), 1e-9).unwrap();
        let pointer_states = random_orthonormal(&mut r, count, count);
        let model = kraus_model(set, &pointer_states, &tol).unwrap();
        let psi = random_ket(&mut r, ds);
        for (label, k) in index_labels(count).iter().zip(&ops) {
            let q = backwards_map(&model, label).unwrap();
            let expect = &k.adjoint() * k;
            prop_assert!(q.max_abs_diff(&expect).unwrap() <= DERIVED);
            let emitted = model.emitted_state(&psi, label).unwrap();
            let direct = k.try_apply(&psi).unwrap().normalized();
            match (emitted, direct) {
                (Some(a), Some(b)) => prop_assert!(a.max_abs_diff(&b).unwrap() <= DERIVED),
                (None, None) => {}
                _ => prop_assert!(false, "emitted state disagrees on reachability"),
            }
        }
    }

    #[test]
    fn calibration_states_give_certain_outcomes(seed in any::<u64>(), ds in 1usize..=4) {
        let mut r = rng(seed);
        let tol = Tolerances::default();
        let basis = random_orthonormal(&mut r, ds, ds);
        let images = random_orthonormal(&mut r, ds + 1, ds);
        let pairs: Vec<_> = basis.iter().cloned().zip(images.iter().cloned()).collect();
        let pointer = images
            .iter()
            .enumerate()
            .map(|(i, phi)| (format!("M{i}"), Projector::from_ket(phi, 1e-10).unwrap().into_matrix()))
            .collect();
        let model = projective_model(&pairs, pointer, &tol).unwrap();
        for (label, s) in model.calibration() {
            let p = model.outcome_probability(&InitialState::Pure(s.clone()), label).unwrap();
            prop_assert!((p - 1.0).abs() <= DERIVED);
        }
    }
}
