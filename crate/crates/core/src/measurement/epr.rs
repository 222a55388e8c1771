use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use super::{measurement_family, MeasurementError, MeasurementModel};
use crate::histories::{Event, HistoryFamily, InitialState, Layout};
use crate::linalg::{ComplexMatrix, Ket, C64};
use crate::objects::{Isometry, Projector};
use crate::Tolerances;

/// Spin axis for a spin-half particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Z,
    X,
}

impl Axis {
    /// `(|+⟩, |−⟩)` along the axis.
    pub fn basis(self) -> (Ket, Ket) {
        match self {
            Axis::Z => (Ket::basis(2, 0), Ket::basis(2, 1)),
            Axis::X => {
                let s = FRAC_1_SQRT_2;
                (
                    Ket::from_real(&[s, s]).expect("finite"),
                    Ket::from_real(&[s, -s]).expect("finite"),
                )
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::Z => "z",
            Axis::X => "x",
        }
    }
}

/// `(|z+⟩|z−⟩ − |z−⟩|z+⟩)/√2`.
pub fn singlet() -> Ket {
    let (p, m) = Axis::Z.basis();
    p.kron(&m)
        .try_sub(&m.kron(&p))
        .expect("same dimension")
        .scale(C64::new(FRAC_1_SQRT_2, 0.0))
}

/// Measurement of particle `a` alone along `axis`: `J = J_a ⊗ I_b` with
/// `J_a|axis±⟩ = |A±⟩`, pointer `M^± = [A±] ⊗ I_b` labelled `M+`, `M-`.
pub fn epr_model(axis: Axis) -> MeasurementModel {
    let tol = Tolerances::default();
    let (p, m) = axis.basis();
    let (ap, am) = Axis::Z.basis();
    let ja = &ComplexMatrix::dyad(&ap, &p) + &ComplexMatrix::dyad(&am, &m);
    let id = ComplexMatrix::identity(2);
    let j = Isometry::new(ja.kron(&id), tol.derived()).expect("unitary by construction");
    let pointer = vec![
        (String::from("M+"), ap.projector().kron(&id)),
        (String::from("M-"), am.projector().kron(&id)),
    ];
    let mut calibration = Vec::new();
    for (label, a) in [("M+", &p), ("M-", &m)] {
        for b in 0..2 {
            calibration.push((String::from(label), a.kron(&Ket::basis(2, b))));
        }
    }
    MeasurementModel::new(
        j,
        Layout::product(vec![2, 2]),
        Layout::product(vec![2, 2]),
        pointer,
        &tol,
    )
    .expect("valid by construction")
    .with_calibration(calibration)
}

/// `[ψ_0] ⊙ {[b±]_a} ⊗ {[b±]_b} ⊙ {M+, M-}` with `b` the given axis.
/// Event atoms read `[z+]_a`, `[z-]_b` and so on.
pub fn epr_family(
    model: &MeasurementModel,
    axis: Axis,
    initial: &InitialState,
    tol: &Tolerances,
) -> Result<HistoryFamily, MeasurementError> {
    let (p, m) = axis.basis();
    let kets = [("+", p), ("-", m)];
    let mut events = Vec::with_capacity(4);
    for (sa, ka) in &kets {
        for (sb, kb) in &kets {
            let ea = Event::local(
                format!("[{}{sa}]_a", axis.name()),
                0,
                Projector::from_ket(ka, tol.numeric)?,
            );
            let eb = Event::local(
                format!("[{}{sb}]_b", axis.name()),
                1,
                Projector::from_ket(kb, tol.numeric)?,
            );
            events.push(ea.and(&eb)?);
        }
    }
    measurement_family(model, initial, &events, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histories::{assign_probabilities, conditional_probability, EventPattern};
    use crate::measurement::backwards_map;

    fn cond(t: &crate::histories::ProbabilityTable, m: &str, atom: &str) -> f64 {
        conditional_probability(
            t,
            &EventPattern::any().at("t2", m),
            &EventPattern::any().at("t1", atom),
            1e-12,
        )
        .unwrap()
    }

    #[test]
    fn singlet_is_normalized_and_antisymmetric() {
        let s = singlet();
        assert!((s.norm() - 1.0).abs() < 1e-15);
        let (xp, xm) = Axis::X.basis();
        let alt = xp
            .kron(&xm)
            .try_sub(&xm.kron(&xp))
            .unwrap()
            .scale(C64::new(FRAC_1_SQRT_2, 0.0));
        assert!(s.projector().max_abs_diff(&alt.projector()).unwrap() < 1e-15);
    }

    #[test]
    fn backwards_map_is_local() {
        let m = epr_model(Axis::Z);
        let q = backwards_map(&m, "M+").unwrap();
        let expect = Ket::basis(2, 0).projector().kron(&ComplexMatrix::identity(2));
        assert!(q.max_abs_diff(&expect).unwrap() < 1e-15);
    }

    #[test]
    fn z_family_correlations() {
        let tol = Tolerances::default();
        let m = epr_model(Axis::Z);
        let fam = epr_family(&m, Axis::Z, &InitialState::Pure(singlet()), &tol).unwrap();
        let t = assign_probabilities(&fam, &tol).unwrap();
        assert!((cond(&t, "M+", "[z+]_a") - 1.0).abs() < 1e-12);
        assert!((cond(&t, "M+", "[z-]_b") - 1.0).abs() < 1e-12);
        assert!((cond(&t, "M-", "[z+]_b") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn x_family_uninformative() {
        let tol = Tolerances::default();
        let m = epr_model(Axis::Z);
        let fam = epr_family(&m, Axis::X, &InitialState::Pure(singlet()), &tol).unwrap();
        let t = assign_probabilities(&fam, &tol).unwrap();
        let both = |m: &str, a: &str, b: &str| {
            conditional_probability(
                &t,
                &EventPattern::any().at("t2", m),
                &EventPattern::any().at("t1", format!("{a}&{b}")),
                1e-12,
            )
            .unwrap()
        };
        for m in ["M+", "M-"] {
            assert!((both(m, "[x+]_a", "[x-]_b") - 0.5).abs() < 1e-12);
            assert!((both(m, "[x-]_a", "[x+]_b") - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn product_input_is_certain() {
        let m = epr_model(Axis::Z);
        let psi = Ket::basis(2, 0).kron(&Ket::basis(2, 0));
        let p = m.outcome_probability(&InitialState::Pure(psi), "M+").unwrap();
        assert!((p - 1.0).abs() < 1e-15);
    }
}
