//! Measurement models: an isometry `J` from the system space into an
//! apparatus space carrying a pointer PDI, the backwards map that turns
//! pointer positions into POVM elements, and the inference families that
//! say what prior property an outcome reveals.

mod context;
mod epr;
mod kraus;

pub use context::{noncontextuality_check, CoarseGroup, NoncontextualityReport, ProbeReport};
pub use epr::{epr_family, epr_model, singlet, Axis};
pub use kraus::{kraus_model, luders_model, preparation_model, KrausSet, PreparationModel};

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::histories::{
    assign_probabilities, Event, History, HistoryError, HistoryFamily, InitialState, Layout, ProbabilityTable, TimeGrid,
};
use crate::linalg::{hermitian_eigendecomposition, ComplexMatrix, Ket, LinalgError};
use crate::objects::{Isometry, ObjectError, Pdi, Povm, Projector};
use crate::Tolerances;

/// Label of the pointer remainder `M^0 = I − Σ M^k`.
pub const REMAINDER: &str = "0";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeasurementError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Object(#[from] ObjectError),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error("kets {first} and {second} are not orthonormal (deviation {magnitude:e})")]
    NonOrthonormalBasis {
        first: usize,
        second: usize,
        magnitude: f64,
    },
    #[error("{count} kets cannot span a space of dimension {dim}")]
    IncompleteBasis { count: usize, dim: usize },
    #[error("pointer {k} does not act as δ on image {j} (deviation {magnitude:e})")]
    PointerMismatch { j: usize, k: usize, magnitude: f64 },
    #[error("label `0` is reserved for the pointer remainder")]
    ReservedLabel,
    #[error("unknown outcome `{0}`")]
    UnknownOutcome(String),
    #[error("Kraus operators violate Σ K†K = I by {0:e}")]
    ClosureViolation(f64),
    #[error("probabilities sum to 1 {0:+e}")]
    ProbabilityDeficit(f64),
    #[error("coarse graining does not partition the outcomes: {0}")]
    CoarseGrainMismatch(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("layout of dimension {layout} does not match space of dimension {space}")]
    LayoutMismatch { layout: usize, space: usize },
}

/// Isometry `J: H_s → H_M` with a pointer PDI on `H_M`.
///
/// The pointer always carries the remainder `M^0` under label `"0"`, which
/// may be the zero projector.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementModel {
    system: Layout,
    apparatus: Layout,
    isometry: Isometry,
    pointer: Pdi,
    apparatus_ready: Option<Ket>,
    calibration: Vec<(String, Ket)>,
    kraus: Option<KrausSet>,
}

impl MeasurementModel {
    pub fn new(
        isometry: Isometry,
        system: Layout,
        apparatus: Layout,
        pointer: Vec<(String, ComplexMatrix)>,
        tol: &Tolerances,
    ) -> Result<Self, MeasurementError> {
        if system.dim() != isometry.source_dim() {
            return Err(MeasurementError::LayoutMismatch {
                layout: system.dim(),
                space: isometry.source_dim(),
            });
        }
        if apparatus.dim() != isometry.target_dim() {
            return Err(MeasurementError::LayoutMismatch {
                layout: apparatus.dim(),
                space: isometry.target_dim(),
            });
        }
        let pointer = pointer_pdi(pointer, apparatus.dim(), tol)?;
        Ok(Self {
            system,
            apparatus,
            isometry,
            pointer,
            apparatus_ready: None,
            calibration: Vec::new(),
            kraus: None,
        })
    }

    /// Model from a unitary `T` on `H_s ⊗ H_a` and a ready state `|Ω_0⟩`:
    /// `J|ψ⟩ = T(|ψ⟩ ⊗ |Ω_0⟩)`.
    pub fn from_unitary(
        t: &ComplexMatrix,
        ready: Ket,
        system: Layout,
        pointer: Vec<(String, ComplexMatrix)>,
        tol: &Tolerances,
    ) -> Result<Self, MeasurementError> {
        let ds = system.dim();
        let da = ready.dim();
        if t.shape() != (ds * da, ds * da) {
            return Err(MeasurementError::DimensionMismatch {
                expected: ds * da,
                actual: t.rows(),
            });
        }
        let embed = ComplexMatrix::identity(ds).kron(&ComplexMatrix::from_column(&ready));
        let j = Isometry::new(t.try_mul(&embed)?, tol.derived())?;
        let mut factors = system.factors().to_vec();
        factors.push(da);
        let mut model = Self::new(j, system, Layout::product(factors), pointer, tol)?;
        model.apparatus_ready = Some(ready);
        Ok(model)
    }

    pub fn system_dim(&self) -> usize {
        self.system.dim()
    }

    pub fn measurement_dim(&self) -> usize {
        self.apparatus.dim()
    }

    pub fn system_layout(&self) -> &Layout {
        &self.system
    }

    pub fn measurement_layout(&self) -> &Layout {
        &self.apparatus
    }

    pub fn isometry(&self) -> &Isometry {
        &self.isometry
    }

    /// Pointer PDI including the remainder.
    pub fn pointer(&self) -> &Pdi {
        &self.pointer
    }

    /// Outcome labels without the remainder.
    pub fn outcome_labels(&self) -> Vec<&str> {
        self.pointer
            .labels()
            .iter()
            .map(String::as_str)
            .filter(|l| *l != REMAINDER)
            .collect()
    }

    pub fn remainder(&self) -> &Projector {
        self.pointer
            .get(REMAINDER)
            .expect("pointer always carries the remainder")
    }

    pub fn apparatus_ready(&self) -> Option<&Ket> {
        self.apparatus_ready.as_ref()
    }

    /// Eigenstate inputs paired with the outcome they must produce.
    pub fn calibration(&self) -> &[(String, Ket)] {
        &self.calibration
    }

    pub fn kraus(&self) -> Option<&KrausSet> {
        self.kraus.as_ref()
    }

    pub fn with_calibration(mut self, calibration: Vec<(String, Ket)>) -> Self {
        self.calibration = calibration;
        self
    }

    /// `Tr(ρ Q^k)`.
    pub fn outcome_probability(&self, state: &InitialState, k: &str) -> Result<f64, MeasurementError> {
        let q = backwards_map(self, k)?;
        Ok(state.expectation(&q)?)
    }

    /// State emitted with outcome `k` of a Kraus model: `K^k|ψ⟩` normalized,
    /// or `None` when the outcome cannot occur.
    pub fn emitted_state(&self, psi: &Ket, k: &str) -> Result<Option<Ket>, MeasurementError> {
        let kraus = self
            .kraus
            .as_ref()
            .ok_or_else(|| MeasurementError::UnknownOutcome(k.into()))?;
        let op = kraus.get(k).ok_or_else(|| MeasurementError::UnknownOutcome(k.into()))?;
        Ok(op.try_apply(psi)?.normalized())
    }
}

fn pointer_pdi(pointer: Vec<(String, ComplexMatrix)>, dim: usize, tol: &Tolerances) -> Result<Pdi, MeasurementError> {
    let mut labels = Vec::with_capacity(pointer.len() + 1);
    let mut mats = Vec::with_capacity(pointer.len() + 1);
    let mut rest = ComplexMatrix::identity(dim);
    for (l, m) in pointer {
        if l == REMAINDER {
            return Err(MeasurementError::ReservedLabel);
        }
        if m.shape() != (dim, dim) {
            return Err(MeasurementError::DimensionMismatch {
                expected: dim,
                actual: m.rows(),
            });
        }
        rest = rest.try_sub(&m)?;
        labels.push(l);
        mats.push(m);
    }
    labels.push(REMAINDER.to_string());
    mats.push(rest);
    Ok(Pdi::new(labels, mats, tol.derived())?)
}

/// Largest deviation of `⟨a_i|a_j⟩` from `δ_ij`, with the offending pair.
pub(crate) fn orthonormality_defect(kets: &[Ket]) -> Result<Option<(usize, usize, f64)>, LinalgError> {
    let mut worst: Option<(usize, usize, f64)> = None;
    for i in 0..kets.len() {
        for j in i..kets.len() {
            let target = if i == j { 1.0 } else { 0.0 };
            let d = (kets[i].inner(&kets[j])? - target).norm();
            if worst.is_none_or(|(_, _, w)| d > w) {
                worst = Some((i, j, d));
            }
        }
    }
    Ok(worst)
}

pub(crate) fn require_orthonormal(kets: &[Ket], tol: f64) -> Result<(), MeasurementError> {
    if let Some((first, second, magnitude)) = orthonormality_defect(kets)? {
        if magnitude > tol {
            return Err(MeasurementError::NonOrthonormalBasis {
                first,
                second,
                magnitude,
            });
        }
    }
    Ok(())
}

fn common_ket_dim(kets: &[Ket]) -> Result<usize, MeasurementError> {
    let dim = kets.first().map(Ket::dim).ok_or(ObjectError::Empty)?;
    for k in kets {
        if k.dim() != dim {
            return Err(MeasurementError::DimensionMismatch {
                expected: dim,
                actual: k.dim(),
            });
        }
    }
    Ok(dim)
}

/// `J|s^j⟩ = |Φ^j⟩` for an orthonormal basis `{|s^j⟩}`; pointer `k` must
/// contain image `k` and annihilate the others.
pub fn projective_model(
    basis_images: &[(Ket, Ket)],
    pointer: Vec<(String, ComplexMatrix)>,
    tol: &Tolerances,
) -> Result<MeasurementModel, MeasurementError> {
    let basis: Vec<Ket> = basis_images.iter().map(|(s, _)| s.clone()).collect();
    let images: Vec<Ket> = basis_images.iter().map(|(_, p)| p.clone()).collect();
    let ds = common_ket_dim(&basis)?;
    let dm = common_ket_dim(&images)?;
    if basis.len() != ds {
        return Err(MeasurementError::IncompleteBasis {
            count: basis.len(),
            dim: ds,
        });
    }
    require_orthonormal(&basis, tol.numeric)?;
    require_orthonormal(&images, tol.numeric)?;
    if pointer.len() != images.len() {
        return Err(MeasurementError::PointerMismatch {
            j: images.len(),
            k: pointer.len(),
            magnitude: f64::INFINITY,
        });
    }
    for (j, phi) in images.iter().enumerate() {
        for (k, (_, m)) in pointer.iter().enumerate() {
            let expect = if j == k { phi.clone() } else { Ket::zeros(dm) };
            let got = m.try_apply(phi)?;
            let magnitude = got.max_abs_diff(&expect).unwrap_or(f64::INFINITY);
            if magnitude > tol.numeric {
                return Err(MeasurementError::PointerMismatch { j, k, magnitude });
            }
        }
    }
    let mut j = ComplexMatrix::zeros(dm, ds);
    for (s, phi) in basis_images {
        j = &j + &ComplexMatrix::dyad(phi, s);
    }
    let isometry = Isometry::new(j, tol.derived())?;
    let calibration = pointer
        .iter()
        .zip(&basis)
        .map(|((l, _), s)| (l.clone(), s.clone()))
        .collect();
    Ok(
        MeasurementModel::new(isometry, Layout::simple(ds), Layout::simple(dm), pointer, tol)?
            .with_calibration(calibration),
    )
}

/// `Q^k = J† M^k J`.
pub fn backwards_map(model: &MeasurementModel, k: &str) -> Result<ComplexMatrix, MeasurementError> {
    let m = model
        .pointer
        .get(k)
        .ok_or_else(|| MeasurementError::UnknownOutcome(k.into()))?;
    Ok(model.isometry.pull_back(m.matrix())?.hermitian_part()?)
}

/// `{Q^k}` over every pointer label including the remainder.
pub fn derive_povm(model: &MeasurementModel, tol: &Tolerances) -> Result<Povm, MeasurementError> {
    let labels: Vec<String> = model.pointer.labels().to_vec();
    let elements = labels
        .iter()
        .map(|l| backwards_map(model, l))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Povm::new(labels, elements, tol.derived())?)
}

/// What outcome `k` reveals about the system at `t_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub outcome: String,
    pub q: ComplexMatrix,
    /// Spectral projectors `ξ^{jk}` of `Q^k`, descending eigenvalue.
    pub inference_pdi: Pdi,
    pub eigenvalues: Vec<f64>,
    pub outcome_probability: f64,
    /// `Pr(ξ^{jk} at t_1 | M^k at t_2)`; `None` when the outcome is unreachable.
    pub prior_distribution: Option<Vec<(String, f64)>>,
    /// `Q^k` is proportional to a single projector.
    pub certain: bool,
}

impl InferenceResult {
    /// Spectral projector carrying the largest conditional weight.
    pub fn most_likely(&self) -> Option<(&str, f64)> {
        let dist = self.prior_distribution.as_ref()?;
        dist.iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(l, p)| (l.as_str(), *p))
    }
}

#[derive(Debug, Clone)]
pub struct Inference {
    pub family: HistoryFamily,
    pub table: ProbabilityTable,
    pub results: Vec<InferenceResult>,
}

/// Label of the `j`-th spectral projector of `Q^k`.
pub fn xi_label(j: usize, k: &str) -> String {
    format!("xi_{j}_{k}")
}

/// Builds `Y^{jk} = [Ψ_0] ⊙ ξ^{jk} ⊙ M^k` on `t_0, t_1, t_2` with
/// `T(t_1, t_0) = I` and `T(t_2, t_1) = J`, then reads off outcome
/// marginals and the conditional distribution of the prior properties.
pub fn inference_family(
    model: &MeasurementModel,
    initial: &InitialState,
    tol: &Tolerances,
) -> Result<Inference, MeasurementError> {
    let mut histories = Vec::new();
    let mut spectra = Vec::new();
    for (k, m) in model.pointer.iter() {
        if k == REMAINDER && m.rank() == 0 {
            continue;
        }
        let q = backwards_map(model, k)?;
        let es = hermitian_eigendecomposition(&q, tol.group)?;
        let labels: Vec<String> = (1..=es.groups.len()).map(|j| xi_label(j, k)).collect();
        let mats: Vec<ComplexMatrix> = es.groups.iter().map(|g| g.projector.clone()).collect();
        let pdi = Pdi::new(labels, mats, tol.derived())?;
        for (l, xi) in pdi.iter() {
            histories.push(History::new(vec![
                Event::full(l, xi.clone()),
                Event::full(k, m.clone()),
            ]));
        }
        let values: Vec<f64> = es.eigenvalues().collect();
        spectra.push((k.to_string(), q, pdi, values));
    }
    let grid = TimeGrid::new(
        crate::histories::default_time_labels(3),
        vec![model.system.clone(), model.system.clone(), model.apparatus.clone()],
        vec![Isometry::identity(model.system_dim()), model.isometry.clone()],
    )?;
    let family = HistoryFamily::new(initial.clone(), grid, histories, tol)?;
    let table = assign_probabilities(&family, tol)?;

    let mut results = Vec::new();
    let mut cursor = 0;
    for (k, q, pdi, values) in spectra {
        let joint: Vec<f64> = table.entries[cursor..cursor + pdi.len()]
            .iter()
            .map(|(_, p)| *p)
            .collect();
        cursor += pdi.len();
        let outcome_probability: f64 = joint.iter().sum();
        let prior_distribution = (outcome_probability > tol.numeric).then(|| {
            pdi.labels()
                .iter()
                .zip(&joint)
                .map(|(l, p)| (l.clone(), p / outcome_probability))
                .collect()
        });
        let certain = values.iter().filter(|v| **v > tol.group).count() == 1;
        results.push(InferenceResult {
            outcome: k,
            q,
            inference_pdi: pdi,
            eigenvalues: values,
            outcome_probability,
            prior_distribution,
            certain,
        });
    }
    Ok(Inference { family, table, results })
}

/// `[Ψ_0] ⊙ {E_i} ⊙ {M^k}` with arbitrary events at `t_1` and every
/// pointer position (the remainder only when it is nonzero) at `t_2`.
pub fn measurement_family(
    model: &MeasurementModel,
    initial: &InitialState,
    events: &[Event],
    tol: &Tolerances,
) -> Result<HistoryFamily, MeasurementError> {
    let mut histories = Vec::new();
    for e in events {
        for (k, m) in model.pointer.iter() {
            if k == REMAINDER && m.rank() == 0 {
                continue;
            }
            histories.push(History::new(vec![e.clone(), Event::full(k, m.clone())]));
        }
    }
    let grid = TimeGrid::new(
        crate::histories::default_time_labels(3),
        vec![model.system.clone(), model.system.clone(), model.apparatus.clone()],
        vec![Isometry::identity(model.system_dim()), model.isometry.clone()],
    )?;
    Ok(HistoryFamily::new(initial.clone(), grid, histories, tol)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histories::{check_consistency, conditional_probability, EventPattern, Verdict};
    use crate::linalg::C64;
    use core::f64::consts::FRAC_1_SQRT_2 as S;

    fn k(v: &[f64]) -> Ket {
        Ket::from_real(v).unwrap()
    }

    fn sz_model() -> MeasurementModel {
        let tol = Tolerances::default();
        let zp = k(&[1.0, 0.0]);
        let zm = k(&[0.0, 1.0]);
        projective_model(
            &[(zp.clone(), zp.clone()), (zm.clone(), zm.clone())],
            vec![("Z+".into(), zp.projector()), ("Z-".into(), zm.projector())],
            &tol,
        )
        .unwrap()
    }

    fn trine_states() -> Vec<Ket> {
        let w = C64::new(-0.5, 3f64.sqrt() / 2.0);
        let s = C64::new(S, 0.0);
        vec![
            Ket::new(vec![s, s]).unwrap(),
            Ket::new(vec![s * w, s * w * w]).unwrap(),
            Ket::new(vec![s * w * w, s * w]).unwrap(),
        ]
    }

    // J|u^k⟩ = √(3/2)|k⟩ − √(1/2)|w⟩, i.e. J = (2/3) Σ_k |v^k⟩⟨u^k|
    fn trine_model() -> MeasurementModel {
        let u = trine_states();
        let r3 = 1.0 / 3f64.sqrt();
        let w = k(&[r3, r3, r3]);
        let mut j = ComplexMatrix::zeros(3, 2);
        for (i, uk) in u.iter().enumerate() {
            let v = Ket::basis(3, i)
                .scale(C64::new(1.5f64.sqrt(), 0.0))
                .try_sub(&w.scale(C64::new(S, 0.0)))
                .unwrap();
            j = &j + &ComplexMatrix::dyad(&v, uk).scale_real(2.0 / 3.0);
        }
        let tol = Tolerances::default();
        let iso = Isometry::new(j, 1e-10).unwrap();
        let pointer = (0..3)
            .map(|i| (format!("{}", i + 1), Ket::basis(3, i).projector()))
            .collect();
        MeasurementModel::new(iso, Layout::simple(2), Layout::simple(3), pointer, &tol).unwrap()
    }

    #[test]
    fn sz_backwards_map_recovers_basis() {
        let m = sz_model();
        let q = backwards_map(&m, "Z+").unwrap();
        assert!(q.max_abs_diff(&k(&[1.0, 0.0]).projector()).unwrap() < 1e-15);
        assert!(backwards_map(&m, REMAINDER).unwrap().max_abs() < 1e-15);
        assert_eq!(
            backwards_map(&m, "nope"),
            Err(MeasurementError::UnknownOutcome("nope".into()))
        );
    }

    #[test]
    fn identity_measurement() {
        let tol = Tolerances::default();
        let b: Vec<_> = (0..3).map(|i| (Ket::basis(3, i), Ket::basis(3, i))).collect();
        let pointer = (0..3)
            .map(|i| (format!("s{i}"), Ket::basis(3, i).projector()))
            .collect();
        let m = projective_model(&b, pointer, &tol).unwrap();
        assert!(m.isometry().matrix().identity_defect().unwrap() < 1e-15);
        assert_eq!(m.remainder().rank(), 0);
    }

    #[test]
    fn pointer_mismatch_names_pair() {
        let tol = Tolerances::default();
        let zp = k(&[1.0, 0.0]);
        let zm = k(&[0.0, 1.0]);
        // both images land in the second pointer subspace
        let err = projective_model(
            &[(zp.clone(), zm.clone()), (zm.clone(), zp.clone())],
            vec![("a".into(), zp.projector()), ("b".into(), zm.projector())],
            &tol,
        )
        .unwrap_err();
        assert!(matches!(err, MeasurementError::PointerMismatch { j: 0, k: 0, .. }));
    }

    #[test]
    fn non_orthonormal_basis_rejected() {
        let tol = Tolerances::default();
        let zp = k(&[1.0, 0.0]);
        let xp = k(&[S, S]);
        let err = projective_model(
            &[(zp.clone(), zp.clone()), (xp.clone(), k(&[0.0, 1.0]))],
            vec![("a".into(), zp.projector()), ("b".into(), k(&[0.0, 1.0]).projector())],
            &tol,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            MeasurementError::NonOrthonormalBasis {
                first: 0,
                second: 1,
                ..
            }
        ));
    }

    #[test]
    fn reserved_label_rejected() {
        let tol = Tolerances::default();
        let err = MeasurementModel::new(
            Isometry::identity(2),
            Layout::simple(2),
            Layout::simple(2),
            vec![("0".into(), ComplexMatrix::identity(2))],
            &tol,
        )
        .unwrap_err();
        assert_eq!(err, MeasurementError::ReservedLabel);
    }

    #[test]
    fn trine_povm_and_marginals() {
        let tol = Tolerances::default();
        let m = trine_model();
        let povm = derive_povm(&m, &tol).unwrap();
        assert_eq!(povm.len(), 4);
        assert!(povm.get("0").unwrap().max_abs() < 1e-15);
        let u = trine_states();
        for (i, uk) in u.iter().enumerate() {
            let q = povm.get(&format!("{}", i + 1)).unwrap();
            assert!(q.max_abs_diff(&uk.projector().scale_real(2.0 / 3.0)).unwrap() < 1e-12);
        }
        let u1 = u[0].clone();

        let inf = inference_family(&m, &InitialState::Pure(u1), &tol).unwrap();
        let p: Vec<f64> = inf.results.iter().map(|r| r.outcome_probability).collect();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 6.0).abs() < 1e-12);
        assert!(inf.results.iter().all(|r| r.certain));
        // the family never includes a zero remainder
        assert_eq!(inf.results.len(), 3);
    }

    #[test]
    fn projective_inference_is_delta() {
        let tol = Tolerances::default();
        let m = sz_model();
        let psi = Ket::new(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let inf = inference_family(&m, &InitialState::Pure(psi), &tol).unwrap();
        let r = &inf.results[0];
        assert!((r.outcome_probability - 0.36).abs() < 1e-12);
        let dist = r.prior_distribution.as_ref().unwrap();
        assert!((dist[0].1 - 1.0).abs() < 1e-12);
        assert_eq!(r.most_likely().unwrap().0, "xi_1_Z+");
    }

    #[test]
    fn unreachable_outcome_has_no_distribution() {
        let tol = Tolerances::default();
        let inf = inference_family(&sz_model(), &InitialState::Pure(k(&[1.0, 0.0])), &tol).unwrap();
        assert!(inf.results[1].prior_distribution.is_none());
    }

    #[test]
    fn general_family_on_model() {
        let tol = Tolerances::default();
        let m = sz_model();
        let xp = Projector::from_ket(&k(&[S, S]), 1e-10).unwrap();
        let events = [Event::full("x+", xp.clone()), Event::full("x-", xp.complement())];
        let fam = measurement_family(&m, &InitialState::Pure(k(&[1.0, 0.0])), &events, &tol).unwrap();
        let rep = check_consistency(&fam, tol.consistency).unwrap();
        assert_eq!(rep.verdict, Verdict::Inconsistent);
        let events = [
            Event::full("z+", Projector::from_ket(&k(&[1.0, 0.0]), 1e-10).unwrap()),
            Event::full("z-", Projector::from_ket(&k(&[0.0, 1.0]), 1e-10).unwrap()),
        ];
        let fam = measurement_family(&m, &InitialState::Pure(k(&[S, S])), &events, &tol).unwrap();
        let t = assign_probabilities(&fam, &tol).unwrap();
        let c = conditional_probability(
            &t,
            &EventPattern::any().at("t2", "Z-"),
            &EventPattern::any().at("t1", "z-"),
            1e-12,
        )
        .unwrap();
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn from_unitary_embeds_ready_state() {
        let tol = Tolerances::default();
        // CNOT with the apparatus as target
        let cnot = ComplexMatrix::from_real_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0, 1.0, 0.0],
        ])
        .unwrap();
        let ready = Ket::basis(2, 0);
        let mp = ComplexMatrix::identity(2).kron(&Ket::basis(2, 0).projector());
        let mm = ComplexMatrix::identity(2).kron(&Ket::basis(2, 1).projector());
        let m = MeasurementModel::from_unitary(
            &cnot,
            ready,
            Layout::simple(2),
            vec![("up".into(), mp), ("down".into(), mm)],
            &tol,
        )
        .unwrap();
        assert_eq!(m.measurement_layout().factors(), &[2, 2]);
        let q = backwards_map(&m, "down").unwrap();
        assert!(q.max_abs_diff(&Ket::basis(2, 1).projector()).unwrap() < 1e-15);
    }
}
