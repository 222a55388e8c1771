use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;

use super::{require_orthonormal, MeasurementError, MeasurementModel, REMAINDER};
use crate::histories::Layout;
use crate::linalg::{ComplexMatrix, Ket, C64};
use crate::objects::{index_labels, Isometry, ObjectError, Pdi, Povm};
use crate::Tolerances;

/// Labelled Kraus operators on `H_s` with `Σ_j (K^j)† K^j = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    labels: Vec<String>,
    operators: Vec<ComplexMatrix>,
}

impl KrausSet {
    pub fn new(labels: Vec<String>, operators: Vec<ComplexMatrix>, tol: f64) -> Result<Self, MeasurementError> {
        let first = operators.first().ok_or(ObjectError::Empty)?;
        first.require_square()?;
        let n = first.rows();
        if labels.len() != operators.len() {
            return Err(ObjectError::LabelCount {
                labels: labels.len(),
                items: operators.len(),
            }
            .into());
        }
        for (i, l) in labels.iter().enumerate() {
            if l == REMAINDER {
                return Err(MeasurementError::ReservedLabel);
            }
            if labels[..i].contains(l) {
                return Err(ObjectError::DuplicateLabel(l.clone()).into());
            }
        }
        let mut closure = ComplexMatrix::zeros(n, n);
        for k in &operators {
            if k.shape() != (n, n) {
                return Err(MeasurementError::DimensionMismatch {
                    expected: n,
                    actual: k.rows(),
                });
            }
            closure = &closure + &(&k.adjoint() * k);
        }
        let defect = closure.identity_defect()?;
        if defect > tol {
            return Err(MeasurementError::ClosureViolation(defect));
        }
        Ok(Self { labels, operators })
    }

    /// `K^j = P^j` for a PDI.
    pub fn luders(pdi: &Pdi) -> Self {
        Self {
            labels: pdi.labels().to_vec(),
            operators: pdi.projectors().iter().map(|p| p.matrix().clone()).collect(),
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.operators[0].rows()
    }

    pub fn get(&self, label: &str) -> Option<&ComplexMatrix> {
        self.labels.iter().position(|l| l == label).map(|i| &self.operators[i])
    }

    /// `{(K^j)† K^j}` with the Kraus labels.
    pub fn povm(&self, tol: f64) -> Result<Povm, MeasurementError> {
        let elements = self.operators.iter().map(|k| &k.adjoint() * k).collect();
        Ok(Povm::new(self.labels.clone(), elements, tol)?)
    }
}

/// `J|ψ⟩ = Σ_j K^j|ψ⟩ ⊗ |Φ^j⟩` on `H_s ⊗ H_m`, pointer `M^j = I_s ⊗ [Φ^j]`.
pub fn kraus_model(
    kraus: KrausSet,
    pointer_states: &[Ket],
    tol: &Tolerances,
) -> Result<MeasurementModel, MeasurementError> {
    if pointer_states.len() != kraus.len() {
        return Err(MeasurementError::DimensionMismatch {
            expected: kraus.len(),
            actual: pointer_states.len(),
        });
    }
    require_orthonormal(pointer_states, tol.numeric)?;
    let ds = kraus.dim();
    let dm = pointer_states[0].dim();
    let mut j = ComplexMatrix::zeros(ds * dm, ds);
    for (k, phi) in kraus.operators.iter().zip(pointer_states) {
        if phi.dim() != dm {
            return Err(MeasurementError::DimensionMismatch {
                expected: dm,
                actual: phi.dim(),
            });
        }
        j = &j + &k.kron(&ComplexMatrix::from_column(phi));
    }
    let isometry = Isometry::new(j, tol.derived())?;
    let id = ComplexMatrix::identity(ds);
    let pointer = kraus
        .labels
        .iter()
        .cloned()
        .zip(pointer_states.iter().map(|phi| id.kron(&phi.projector())))
        .collect();
    let mut model = MeasurementModel::new(
        isometry,
        Layout::simple(ds),
        Layout::product(alloc::vec![ds, dm]),
        pointer,
        tol,
    )?;
    model.kraus = Some(kraus);
    Ok(model)
}

/// Nondestructive measurement of a PDI: Kraus operators equal to its
/// projectors. Every unit-eigenvalue vector of `P^j` is recorded as a
/// calibration input for outcome `j`.
pub fn luders_model(pdi: &Pdi, pointer_states: &[Ket], tol: &Tolerances) -> Result<MeasurementModel, MeasurementError> {
    let calibration = pdi
        .iter()
        .flat_map(|(l, p)| p.range_basis().into_iter().map(move |v| (String::from(l), v)))
        .collect();
    Ok(kraus_model(KrausSet::luders(pdi), pointer_states, tol)?.with_calibration(calibration))
}

/// Preparation with `J|ψ_1⟩ = Σ_k √p_k |ŝ^k⟩ ⊗ |Φ^k⟩`.
///
/// The source space is the one-dimensional span of `|ψ_1⟩`, so `J` is the
/// single column `Σ_k √p_k |ŝ^k⟩ ⊗ |Φ^k⟩` and `J†J = Σ_k p_k`. The targets
/// need not be orthogonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparationModel {
    model: MeasurementModel,
    targets: Vec<(f64, Ket)>,
    pointer_states: Vec<Ket>,
}

pub fn preparation_model(
    targets: &[(f64, Ket)],
    pointer_states: &[Ket],
    tol: &Tolerances,
) -> Result<PreparationModel, MeasurementError> {
    if targets.is_empty() {
        return Err(ObjectError::Empty.into());
    }
    if pointer_states.len() != targets.len() {
        return Err(MeasurementError::DimensionMismatch {
            expected: targets.len(),
            actual: pointer_states.len(),
        });
    }
    require_orthonormal(pointer_states, tol.numeric)?;
    let ds = targets[0].1.dim();
    let dm = pointer_states[0].dim();
    let mut total = 0.0;
    let mut omega = Ket::zeros(ds * dm);
    for (i, (p, s)) in targets.iter().enumerate() {
        if !p.is_finite() || *p < 0.0 {
            return Err(MeasurementError::ProbabilityDeficit(*p));
        }
        if s.dim() != ds {
            return Err(MeasurementError::DimensionMismatch {
                expected: ds,
                actual: s.dim(),
            });
        }
        if !s.is_normalized(tol.numeric) {
            return Err(MeasurementError::NonOrthonormalBasis {
                first: i,
                second: i,
                magnitude: Float::abs(s.norm() - 1.0),
            });
        }
        total += p;
        omega = omega.try_add(&s.kron(&pointer_states[i]).scale(C64::new(Float::sqrt(*p), 0.0)))?;
    }
    if Float::abs(total - 1.0) > tol.numeric {
        return Err(MeasurementError::ProbabilityDeficit(total - 1.0));
    }
    let isometry = Isometry::new(ComplexMatrix::from_column(&omega), tol.derived())?;
    let id = ComplexMatrix::identity(ds);
    let pointer = index_labels(targets.len())
        .into_iter()
        .zip(pointer_states.iter().map(|phi| id.kron(&phi.projector())))
        .collect();
    let model = MeasurementModel::new(
        isometry,
        Layout::simple(1),
        Layout::product(alloc::vec![ds, dm]),
        pointer,
        tol,
    )?;
    Ok(PreparationModel {
        model,
        targets: targets.to_vec(),
        pointer_states: pointer_states.to_vec(),
    })
}

impl PreparationModel {
    pub fn model(&self) -> &MeasurementModel {
        &self.model
    }

    pub fn targets(&self) -> &[(f64, Ket)] {
        &self.targets
    }

    /// State of the particle given pointer position `k`, and the probability
    /// of that position. Read off `J|ψ_1⟩` by contracting with `⟨Φ^k|`.
    pub fn query(&self, k: &str) -> Result<(Ket, f64), MeasurementError> {
        let idx = self
            .model
            .outcome_labels()
            .iter()
            .position(|l| *l == k)
            .ok_or_else(|| MeasurementError::UnknownOutcome(k.into()))?;
        let phi = &self.pointer_states[idx];
        let ds = self.targets[0].1.dim();
        let dm = phi.dim();
        let omega = self.model.isometry().matrix().column(0);
        let amps: Vec<C64> = (0..ds)
            .map(|a| (0..dm).map(|m| phi[m].conj() * omega[a * dm + m]).sum())
            .collect();
        let v = Ket::new(amps)?;
        let p = v.norm_sqr();
        let state = if p > crate::tolerance::NUMERIC_TOL {
            v.normalized().expect("nonzero norm")
        } else {
            self.targets[idx].1.clone()
        };
        Ok((state, p))
    }
}
