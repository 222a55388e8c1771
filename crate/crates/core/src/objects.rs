//! Validated quantum structures: projectors, PDIs, POVMs, isometries and
//! observables.
//!
//! Every constructor checks the defining identities constructively. Failures
//! come back as a [`ValidationReport`] naming the first violated identity in
//! the fixed check order hermiticity → idempotence → positivity → pairwise
//! orthogonality → completeness (each collection check only runs the stages
//! that apply to it).

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{hermitian_eigendecomposition, ComplexMatrix, EigenSystem, Ket, LinalgError};
use crate::Tolerances;

/// Which defining identity failed.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Element `index` differs from its adjoint.
    Hermiticity { index: usize },
    /// Element `index` does not square to itself.
    Idempotence { index: usize },
    /// Element `index` has a negative eigenvalue.
    Positivity { index: usize, min_eigenvalue: f64 },
    /// Elements `first` and `second` are not orthogonal.
    Orthogonality { first: usize, second: usize },
    /// The elements do not sum to the identity.
    Completeness,
    /// `J†J` differs from the identity.
    Isometry,
}

/// First violated identity and its magnitude (a max-entry norm).
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violation: Violation,
    pub magnitude: f64,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.violation {
            Violation::Hermiticity { index } => write!(f, "element {index} is not Hermitian"),
            Violation::Idempotence { index } => write!(f, "element {index} is not idempotent"),
            Violation::Positivity { index, min_eigenvalue } => write!(
                f,
                "element {index} is not positive semi-definite (min eigenvalue {min_eigenvalue:e})"
            ),
            Violation::Orthogonality { first, second } => {
                write!(f, "elements {first} and {second} are not orthogonal")
            }
            Violation::Completeness => write!(f, "elements do not sum to the identity"),
            Violation::Isometry => write!(f, "J†J differs from the identity"),
        }?;
        write!(f, " (magnitude {:e})", self.magnitude)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ObjectError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("validation failed: {0}")]
    Validation(ValidationReport),
    #[error("expected a {expected}x{expected} operator, got {actual:?}")]
    DimensionMismatch { expected: usize, actual: (usize, usize) },
    #[error("isometry target dimension {target} is smaller than source dimension {source_dim}")]
    Shape { source_dim: usize, target: usize },
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("{labels} labels for {items} elements")]
    LabelCount { labels: usize, items: usize },
    #[error("collection must not be empty")]
    Empty,
}

fn fail<T>(violation: Violation, magnitude: f64) -> Result<T, ObjectError> {
    Err(ObjectError::Validation(ValidationReport { violation, magnitude }))
}

fn common_dim(items: &[ComplexMatrix]) -> Result<usize, ObjectError> {
    let first = items.first().ok_or(ObjectError::Empty)?;
    first.require_square()?;
    let n = first.rows();
    for m in items {
        if m.shape() != (n, n) {
            return Err(ObjectError::DimensionMismatch {
                expected: n,
                actual: m.shape(),
            });
        }
    }
    Ok(n)
}

fn check_labels(labels: &[String], items: usize) -> Result<(), ObjectError> {
    if labels.len() != items {
        return Err(ObjectError::LabelCount {
            labels: labels.len(),
            items,
        });
    }
    let mut seen = BTreeSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(ObjectError::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

/// Default labels `1, 2, …, n`.
pub fn index_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

fn hermiticity_stage(items: &[ComplexMatrix], tol: f64) -> Result<(), ObjectError> {
    for (index, m) in items.iter().enumerate() {
        let d = m.hermitian_defect()?;
        if d > tol {
            return fail(Violation::Hermiticity { index }, d);
        }
    }
    Ok(())
}

fn idempotence_stage(items: &[ComplexMatrix], tol: f64) -> Result<(), ObjectError> {
    for (index, m) in items.iter().enumerate() {
        let d = m.try_mul(m)?.max_abs_diff(m).unwrap_or(f64::INFINITY);
        if d > tol {
            return fail(Violation::Idempotence { index }, d);
        }
    }
    Ok(())
}

fn orthogonality_stage(items: &[ComplexMatrix], tol: f64) -> Result<(), ObjectError> {
    for first in 0..items.len() {
        for second in first + 1..items.len() {
            let d = items[first].try_mul(&items[second])?.max_abs();
            if d > tol {
                return fail(Violation::Orthogonality { first, second }, d);
            }
        }
    }
    Ok(())
}

fn completeness_stage(items: &[ComplexMatrix], tol: f64) -> Result<(), ObjectError> {
    let sum = ComplexMatrix::sum(items).ok_or(ObjectError::Empty)??;
    let d = sum.identity_defect()?;
    if d > tol {
        return fail(Violation::Completeness, d);
    }
    Ok(())
}

/// Hermitian idempotent operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    matrix: ComplexMatrix,
    rank: usize,
}

impl Projector {
    pub fn new(matrix: ComplexMatrix, tol: f64) -> Result<Self, ObjectError> {
        matrix.require_square()?;
        let items = core::slice::from_ref(&matrix);
        hermiticity_stage(items, tol)?;
        idempotence_stage(items, tol)?;
        let rank = Self::rank_of(&matrix);
        Ok(Self { matrix, rank })
    }

    fn rank_of(m: &ComplexMatrix) -> usize {
        let r = m.trace().re.round();
        if r <= 0.0 {
            0
        } else {
            r as usize
        }
    }

    /// `[ψ]` for a normalized ket.
    pub fn from_ket(ket: &Ket, tol: f64) -> Result<Self, ObjectError> {
        Self::new(ket.projector(), tol)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(n),
            rank: n,
        }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            matrix: ComplexMatrix::zeros(n, n),
            rank: 0,
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// `I − P`.
    pub fn complement(&self) -> Projector {
        let n = self.dim();
        Projector {
            matrix: &ComplexMatrix::identity(n) - &self.matrix,
            rank: n - self.rank,
        }
    }

    /// Orthonormal basis of the range, by Gram-Schmidt on the columns.
    pub fn range_basis(&self) -> Vec<Ket> {
        let mut basis: Vec<Ket> = Vec::with_capacity(self.rank);
        for c in 0..self.matrix.cols() {
            if basis.len() == self.rank {
                break;
            }
            let mut v = self.matrix.column(c);
            for b in &basis {
                let z = b.inner(&v).expect("same dimension");
                v = v.try_sub(&b.scale(z)).expect("same dimension");
            }
            if v.norm() > 1e-6 {
                basis.push(v.normalized().expect("nonzero"));
            }
        }
        basis
    }

    /// `P ⊗ Q`.
    pub fn kron(&self, other: &Projector) -> Projector {
        Projector {
            matrix: self.matrix.kron(&other.matrix),
            rank: self.rank * other.rank,
        }
    }

    pub(crate) fn from_parts_unchecked(matrix: ComplexMatrix, rank: usize) -> Self {
        Self { matrix, rank }
    }
}

/// Projective decomposition of the identity: labelled, mutually orthogonal
/// projectors summing to `I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pdi {
    labels: Vec<String>,
    projectors: Vec<Projector>,
}

impl Pdi {
    pub fn new(labels: Vec<String>, matrices: Vec<ComplexMatrix>, tol: f64) -> Result<Self, ObjectError> {
        common_dim(&matrices)?;
        check_labels(&labels, matrices.len())?;
        hermiticity_stage(&matrices, tol)?;
        idempotence_stage(&matrices, tol)?;
        orthogonality_stage(&matrices, tol)?;
        completeness_stage(&matrices, tol)?;
        let projectors = matrices
            .into_iter()
            .map(|m| {
                let rank = Projector::rank_of(&m);
                Projector::from_parts_unchecked(m, rank)
            })
            .collect();
        Ok(Self { labels, projectors })
    }

    /// PDI of the basis dyads `[e_j]` of an orthonormal list.
    pub fn from_basis(labels: Vec<String>, basis: &[Ket], tol: f64) -> Result<Self, ObjectError> {
        Self::new(labels, basis.iter().map(Ket::projector).collect(), tol)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn projectors(&self) -> &[Projector] {
        &self.projectors
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].dim()
    }

    pub fn get(&self, label: &str) -> Option<&Projector> {
        self.labels.iter().position(|l| l == label).map(|i| &self.projectors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Projector)> {
        self.labels.iter().map(String::as_str).zip(&self.projectors)
    }

    /// The same projectors viewed as POVM elements.
    pub fn to_povm(&self) -> Povm {
        Povm {
            labels: self.labels.clone(),
            elements: self.projectors.iter().map(|p| p.matrix().clone()).collect(),
        }
    }
}

/// Checks the PDI identities on unlabelled matrices (labels `1..n`).
pub fn validate_pdi(projectors: Vec<ComplexMatrix>, tol: f64) -> Result<Pdi, ObjectError> {
    let labels = index_labels(projectors.len());
    Pdi::new(labels, projectors, tol)
}

/// Positive operator-valued measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    labels: Vec<String>,
    elements: Vec<ComplexMatrix>,
}

impl Povm {
    /// Positivity is tested on the smallest eigenvalue of each Hermitian
    /// element with threshold `−tol`.
    pub fn new(labels: Vec<String>, elements: Vec<ComplexMatrix>, tol: f64) -> Result<Self, ObjectError> {
        common_dim(&elements)?;
        check_labels(&labels, elements.len())?;
        hermiticity_stage(&elements, tol)?;
        for (index, m) in elements.iter().enumerate() {
            let spectrum = hermitian_eigendecomposition(&m.hermitian_part()?, crate::tolerance::GROUP_TOL)?;
            let min = spectrum.min_eigenvalue();
            if min < -tol {
                return fail(
                    Violation::Positivity {
                        index,
                        min_eigenvalue: min,
                    },
                    -min,
                );
            }
        }
        completeness_stage(&elements, tol)?;
        Ok(Self { labels, elements })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn get(&self, label: &str) -> Option<&ComplexMatrix> {
        self.labels.iter().position(|l| l == label).map(|i| &self.elements[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ComplexMatrix)> {
        self.labels.iter().map(String::as_str).zip(&self.elements)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

pub fn validate_povm(elements: Vec<ComplexMatrix>, tol: f64) -> Result<Povm, ObjectError> {
    let labels = index_labels(elements.len());
    Povm::new(labels, elements, tol)
}

/// Length-preserving map `J` with `J†J = I`; stored as a
/// `target_dim × source_dim` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Isometry {
    matrix: ComplexMatrix,
}

impl Isometry {
    pub fn new(matrix: ComplexMatrix, tol: f64) -> Result<Self, ObjectError> {
        let (target, source) = matrix.shape();
        if target < source {
            return Err(ObjectError::Shape {
                source_dim: source,
                target,
            });
        }
        let d = matrix.adjoint().try_mul(&matrix)?.identity_defect()?;
        if d > tol {
            return fail(Violation::Isometry, d);
        }
        Ok(Self { matrix })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(n),
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn source_dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn target_dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_unitary(&self) -> bool {
        self.matrix.is_square()
    }

    /// `J†XJ`.
    pub fn pull_back(&self, x: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
        self.matrix.adjoint().try_mul(&x.try_mul(&self.matrix)?)
    }

    pub fn apply(&self, k: &Ket) -> Result<Ket, LinalgError> {
        self.matrix.try_apply(k)
    }

    /// `J_1 ⊗ J_2`.
    pub fn kron(&self, other: &Isometry) -> Isometry {
        Isometry {
            matrix: self.matrix.kron(&other.matrix),
        }
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn compose(&self, inner: &Isometry) -> Result<Isometry, LinalgError> {
        Ok(Isometry {
            matrix: self.matrix.try_mul(&inner.matrix)?,
        })
    }
}

pub fn validate_isometry(matrix: ComplexMatrix, tol: f64) -> Result<Isometry, ObjectError> {
    Isometry::new(matrix, tol)
}

/// Hermitian operator with its spectral PDI.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    matrix: ComplexMatrix,
    spectral: EigenSystem,
}

impl Observable {
    pub fn new(matrix: ComplexMatrix, tol: &Tolerances) -> Result<Self, ObjectError> {
        let spectral = hermitian_eigendecomposition(&matrix, tol.group)?;
        let d = spectral.reconstruct().max_abs_diff(&matrix).unwrap_or(f64::INFINITY);
        if d > tol.derived() {
            return Err(LinalgError::NumericalFailure { sweeps: 0 }.into());
        }
        Ok(Self { matrix, spectral })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn spectral(&self) -> &EigenSystem {
        &self.spectral
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.spectral.eigenvalues().collect()
    }

    /// Spectral projector for the eigenvalue closest to `value`, if one lies
    /// within `tol` of it.
    pub fn projector_for(&self, value: f64, tol: f64) -> Option<&ComplexMatrix> {
        self.spectral
            .groups
            .iter()
            .find(|g| Float::abs(g.eigenvalue - value) <= tol)
            .map(|g| &g.projector)
    }

    /// The spectral projectors as a PDI labelled by eigenvalue.
    pub fn spectral_pdi(&self, tol: f64) -> Result<Pdi, ObjectError> {
        let labels = self
            .spectral
            .groups
            .iter()
            .map(|g| format!("{}", round_label(g.eigenvalue)))
            .collect();
        let mats = self.spectral.groups.iter().map(|g| g.projector.clone()).collect();
        Pdi::new(labels, mats, tol)
    }
}

pub fn observable_from_matrix(m: ComplexMatrix, tol: &Tolerances) -> Result<Observable, ObjectError> {
    Observable::new(m, tol)
}

fn round_label(x: f64) -> f64 {
    let r = (x * 1e9).round() / 1e9;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::FRAC_1_SQRT_2 as S;

    const TOL: f64 = 1e-10;

    fn k(v: &[f64]) -> Ket {
        Ket::from_real(v).unwrap()
    }

    #[test]
    fn z_basis_is_pdi() {
        let pdi = validate_pdi(vec![k(&[1.0, 0.0]).projector(), k(&[0.0, 1.0]).projector()], TOL).unwrap();
        assert_eq!(pdi.len(), 2);
        assert_eq!(pdi.projectors()[0].rank(), 1);
    }

    #[test]
    fn z_and_x_projectors_not_orthogonal() {
        let err = validate_pdi(vec![k(&[1.0, 0.0]).projector(), k(&[S, S]).projector()], TOL).unwrap_err();
        match err {
            ObjectError::Validation(r) => {
                assert_eq!(r.violation, Violation::Orthogonality { first: 0, second: 1 });
                assert!((r.magnitude - 0.5).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pdi_label_rules() {
        let mats = vec![k(&[1.0, 0.0]).projector(), k(&[0.0, 1.0]).projector()];
        assert_eq!(
            Pdi::new(vec!["a".into(), "a".into()], mats.clone(), TOL),
            Err(ObjectError::DuplicateLabel("a".into()))
        );
        assert!(matches!(
            Pdi::new(vec!["a".into()], mats, TOL),
            Err(ObjectError::LabelCount { .. })
        ));
        assert_eq!(validate_pdi(vec![], TOL), Err(ObjectError::Empty));
    }

    #[test]
    fn identity_povm_and_negative_element() {
        validate_povm(vec![ComplexMatrix::identity(3)], TOL).unwrap();
        let err = validate_povm(
            vec![
                ComplexMatrix::diagonal(&[1.5, 1.0]),
                ComplexMatrix::diagonal(&[-0.5, 0.0]),
            ],
            TOL,
        )
        .unwrap_err();
        match err {
            ObjectError::Validation(r) => {
                assert_eq!(
                    r.violation,
                    Violation::Positivity {
                        index: 1,
                        min_eigenvalue: -0.5
                    }
                );
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn povm_completeness_deficit() {
        let err = validate_povm(vec![ComplexMatrix::diagonal(&[1.0, 0.5])], TOL).unwrap_err();
        assert_eq!(
            err,
            ObjectError::Validation(ValidationReport {
                violation: Violation::Completeness,
                magnitude: 0.5
            })
        );
    }

    #[test]
    fn isometry_checks() {
        let h = ComplexMatrix::from_real_rows(&[&[S, S], &[S, -S]]).unwrap();
        validate_isometry(h, TOL).unwrap();
        let err = validate_isometry(ComplexMatrix::diagonal(&[1.0, 0.5]), TOL).unwrap_err();
        match err {
            ObjectError::Validation(r) => {
                assert_eq!(r.violation, Violation::Isometry);
                assert!((r.magnitude - 0.75).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            validate_isometry(ComplexMatrix::zeros(2, 3), TOL),
            Err(ObjectError::Shape {
                source_dim: 3,
                target: 2
            })
        );
    }

    #[test]
    fn zero_observable() {
        let obs = observable_from_matrix(ComplexMatrix::zeros(2, 2), &Tolerances::default()).unwrap();
        assert_eq!(obs.eigenvalues(), vec![0.0]);
        assert_eq!(obs.spectral().groups[0].multiplicity, 2);
        assert_eq!(obs.spectral_pdi(TOL).unwrap().labels(), &["0".to_string()]);
    }

    #[test]
    fn projector_complement_and_rank() {
        let p = Projector::from_ket(&k(&[S, S]), TOL).unwrap();
        let q = p.complement();
        assert_eq!(q.rank(), 1);
        assert!(q.matrix().max_abs_diff(&k(&[S, -S]).projector()).unwrap() < 1e-15);
        assert!(Projector::new(ComplexMatrix::diagonal(&[0.5, 0.0]), TOL).is_err());
    }
}
