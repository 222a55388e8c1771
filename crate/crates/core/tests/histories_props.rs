mod common;

use common::*;
use histq_core::histories::{
    assign_probabilities, assign_probabilities_unchecked, check_consistency, marginalize, Event, History,
    HistoryFamily, InitialState, Layout, TimeGrid, Verdict,
};
use histq_core::linalg::ComplexMatrix;
use histq_core::measurement::{inference_family, projective_model};
use histq_core::objects::{index_labels, Isometry, Pdi};
use histq_core::Tolerances;
use proptest::prelude::*;
use rand::Rng;

const DERIVED: f64 = 1e-9;

fn labels(prefix: &str, n: usize) -> Vec<String> {
    index_labels(n).into_iter().map(|l| format!("{prefix}{l}")).collect()
}

fn pdi(r: &mut impl Rng, n: usize, prefix: &str) -> Pdi {
    let mats = random_pdi(r, n);
    Pdi::new(labels(prefix, mats.len()), mats, 1e-10).unwrap()
}

/// Product family on a uniform grid with one random PDI per later time.
fn product_family(r: &mut impl Rng, n: usize, pdis: &[Pdi], unitaries: Vec<ComplexMatrix>) -> HistoryFamily {
    let times = pdis.len() + 1;
    let grid = TimeGrid::new(
        histq_core::histories::default_time_labels(times),
        vec![Layout::simple(n); times],
        unitaries
            .into_iter()
            .map(|u| Isometry::new(u, 1e-10).unwrap())
            .collect(),
    )
    .unwrap();
    let mut histories = vec![Vec::new()];
    for p in pdis {
        let mut next = Vec::new();
        for h in &histories {
            for (l, proj) in p.iter() {
                let mut h2: Vec<Event> = h.clone();
                h2.push(Event::full(l, proj.clone()));
                next.push(h2);
            }
        }
        histories = next;
    }
    let psi = random_ket(r, n);
    HistoryFamily::new(
        InitialState::Pure(psi),
        grid,
        histories.into_iter().map(History::new).collect(),
        &Tolerances::default(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn two_time_families_are_consistent(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(seed);
        let p = pdi(&mut r, n, "p");
        let u = random_unitary(&mut r, n);
        let fam = product_family(&mut r, n, &[p], vec![u]);
        let rep = check_consistency(&fam, 1e-8).unwrap();
        prop_assert_eq!(rep.verdict, Verdict::Consistent);
        let t = assign_probabilities(&fam, &Tolerances::default()).unwrap();
        prop_assert!((t.total() - 1.0).abs() <= DERIVED);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gram_matrix_is_hermitian_with_bounded_trace(seed in any::<u64>(), n in 1usize..=4) {
        let mut r = rng(seed);
        let pdis = [pdi(&mut r, n, "a"), pdi(&mut r, n, "b")];
        let us = vec![random_unitary(&mut r, n), random_unitary(&mut r, n)];
        let fam = product_family(&mut r, n, &pdis, us);
        let rep = check_consistency(&fam, 1e-8).unwrap();
        prop_assert!(rep.gram.hermitian_defect().unwrap() < 1e-12);
        let trace: f64 = (0..rep.gram.rows()).map(|i| rep.gram[(i, i)].re).sum();
        prop_assert!(trace <= 1.0 + 1e-10);
        prop_assert!((0..rep.gram.rows()).all(|i| rep.gram[(i, i)].re >= 0.0));
    }

    #[test]
    fn refinement_sums_to_coarse_family(seed in any::<u64>(), ds in 1usize..=4, extra in 0usize..=2) {
        let mut r = rng(seed);
        let tol = Tolerances::default();
        let dm = ds + extra;
        let basis = random_orthonormal(&mut r, ds, ds);
        let images = random_orthonormal(&mut r, dm, ds);
        let pairs: Vec<_> = basis.iter().cloned().zip(images.iter().cloned()).collect();
        let pointer = images.iter().enumerate().map(|(i, phi)| (format!("M{i}"), phi.projector())).collect();
        let model = projective_model(&pairs, pointer, &tol).unwrap();
        let psi = random_ket(&mut r, ds);

        // [ψ] ⊙ {[s^j]} ⊙ {M^k}, summed over j
        let fine = inference_family(&model, &InitialState::Pure(psi.clone()), &tol).unwrap();
        let fine = marginalize(&fine.table, &["t2"]).unwrap();

        // [ψ] ⊙ {M^k} directly
        let grid = TimeGrid::new(
            vec!["t0".into(), "t2".into()],
            vec![Layout::simple(ds), Layout::simple(dm)],
            vec![model.isometry().clone()],
        )
        .unwrap();
        let hs = model
            .pointer()
            .iter()
            .filter(|(_, m)| m.rank() > 0)
            .map(|(l, m)| History::new(vec![Event::full(l, m.clone())]))
            .collect();
        let coarse = HistoryFamily::new(InitialState::Pure(psi), grid, hs, &tol).unwrap();
        let coarse = assign_probabilities(&coarse, &tol).unwrap();
        prop_assert_eq!(fine.entries.len(), coarse.entries.len());
        for ((l1, p1), (l2, p2)) in fine.entries.iter().zip(&coarse.entries) {
            prop_assert_eq!(l1, l2);
            prop_assert!((p1 - p2).abs() <= DERIVED);
        }
    }

    #[test]
    fn identity_step_leaves_probabilities_unchanged(seed in any::<u64>(), n in 1usize..=4) {
        let mut r = rng(seed);
        let tol = Tolerances::default();
        let pdis = [pdi(&mut r, n, "a"), pdi(&mut r, n, "b")];
        let us = vec![random_unitary(&mut r, n), random_unitary(&mut r, n)];
        let mut r2 = r.clone();
        let base = product_family(&mut r, n, &pdis, us.clone());

        let identity = Pdi::new(vec!["I".into()], vec![ComplexMatrix::identity(n)], 1e-10).unwrap();
        let padded_pdis = [pdis[0].clone(), identity, pdis[1].clone()];
        let padded_us = vec![us[0].clone(), ComplexMatrix::identity(n), us[1].clone()];
        let padded = product_family(&mut r2, n, &padded_pdis, padded_us);

        let a = assign_probabilities_unchecked(&base, &tol).unwrap();
        let b = assign_probabilities_unchecked(&padded, &tol).unwrap();
        prop_assert_eq!(a.normative, b.normative);
        for ((_, p), (_, q)) in a.entries.iter().zip(&b.entries) {
            prop_assert!((p - q).abs() <= DERIVED);
        }
    }

    #[test]
    fn ensemble_probabilities_are_mixtures(seed in any::<u64>(), n in 2usize..=4) {
        let mut r = rng(seed);
        let tol = Tolerances::default();
        let p = pdi(&mut r, n, "p");
        let u = Isometry::new(random_unitary(&mut r, n), 1e-10).unwrap();
        let k1 = random_ket(&mut r, n);
        let k2 = random_ket(&mut r, n);
        let w: f64 = r.gen_range(0.0..1.0);
        let grid = TimeGrid::new(vec!["t0".into(), "t1".into()], vec![Layout::simple(n); 2], vec![u]).unwrap();
        let hs: Vec<History> = p.iter().map(|(l, m)| History::new(vec![Event::full(l, m.clone())])).collect();
        let mixed = InitialState::Ensemble(vec![(w, k1.clone()), (1.0 - w, k2.clone())]);
        let fam = HistoryFamily::new(mixed, grid.clone(), hs.clone(), &tol).unwrap();
        let t = assign_probabilities(&fam, &tol).unwrap();
        let t1 = assign_probabilities(&HistoryFamily::new(InitialState::Pure(k1), grid.clone(), hs.clone(), &tol).unwrap(), &tol).unwrap();
        let t2 = assign_probabilities(&HistoryFamily::new(InitialState::Pure(k2), grid, hs, &tol).unwrap(), &tol).unwrap();
        for i in 0..t.entries.len() {
            let expect = w * t1.entries[i].1 + (1.0 - w) * t2.entries[i].1;
            prop_assert!((t.entries[i].1 - expect).abs() <= DERIVED);
        }
    }
}
