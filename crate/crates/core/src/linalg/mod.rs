//! Dense complex linear algebra: matrices, kets, adjoints, Kronecker
//! products and the Hermitian eigensolver.

mod eigen;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_traits::{Float, Zero};

pub use eigen::{hermitian_eigendecomposition, EigenGroup, EigenSystem};

/// Complex amplitude type used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Errors raised by the linear-algebra layer.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix must have at least one row and one column")]
    Empty,
    #[error("expected {expected} entries, got {actual}")]
    EntryCount { expected: usize, actual: usize },
    #[error("non-finite amplitude at position {0}")]
    NonFinite(usize),
    #[error("matrix is {rows}x{cols}, expected a square matrix")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (max asymmetry {max_asymmetry:e})")]
    NotHermitian { max_asymmetry: f64 },
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("eigensolver did not converge after {sweeps} sweeps")]
    NumericalFailure { sweeps: usize },
}

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

fn check_finite(data: &[C64]) -> Result<(), LinalgError> {
    match data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
        Some(i) => Err(LinalgError::NonFinite(i)),
        None => Ok(()),
    }
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, checking shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::Empty);
        }
        if data.len() != rows * cols {
            return Err(LinalgError::EntryCount {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        check_finite(&data)?;
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self, LinalgError> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * m);
        for row in rows {
            if row.len() != m {
                return Err(LinalgError::EntryCount {
                    expected: m,
                    actual: row.len(),
                });
            }
            data.extend(row);
        }
        Self::new(n, m, data)
    }

    /// Real-valued convenience constructor.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self, LinalgError> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
                .collect(),
        )
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![C64::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Diagonal matrix with the given real entries.
    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    /// The dyad `|a⟩⟨b|`.
    pub fn dyad(a: &Ket, b: &Ket) -> Self {
        let mut m = Self::zeros(a.dim(), b.dim());
        for (r, x) in a.amplitudes().iter().enumerate() {
            for (c, y) in b.amplitudes().iter().enumerate() {
                m[(r, c)] = x * y.conj();
            }
        }
        m
    }

    /// The column matrix holding a ket.
    pub fn from_column(k: &Ket) -> Self {
        Self {
            rows: k.dim(),
            cols: 1,
            data: k.amplitudes().to_vec(),
        }
    }

    /// Matrix whose columns are the given kets (all of equal dimension).
    pub fn from_columns(columns: &[Ket]) -> Result<Self, LinalgError> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Ket::dim);
        if cols == 0 || rows == 0 {
            return Err(LinalgError::Empty);
        }
        let mut m = Self::zeros(rows, cols);
        for (c, k) in columns.iter().enumerate() {
            if k.dim() != rows {
                return Err(LinalgError::DimensionMismatch {
                    left: (rows, 1),
                    right: (k.dim(), 1),
                });
            }
            for r in 0..rows {
                m[(r, c)] = k[r];
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Ket {
        Ket::from_vec_unchecked((0..self.rows).map(|r| self[(r, c)]).collect())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// `‖self − other‖_max`; `None` when the shapes differ.
    pub fn max_abs_diff(&self, other: &Self) -> Option<f64> {
        (self.shape() == other.shape()).then(|| {
            self.data
                .iter()
                .zip(&other.data)
                .fold(0.0, |acc, (a, b)| acc.max((a - b).norm()))
        })
    }

    /// `‖self − self†‖_max`, or an error for non-square input.
    pub fn hermitian_defect(&self) -> Result<f64, LinalgError> {
        self.require_square()?;
        let mut worst: f64 = 0.0;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        Ok(worst)
    }

    /// `‖self − I‖_max` for a square matrix.
    pub fn identity_defect(&self) -> Result<f64, LinalgError> {
        self.require_square()?;
        Ok(self.max_abs_diff(&Self::identity(self.rows)).unwrap_or(f64::INFINITY))
    }

    pub fn require_square(&self) -> Result<(), LinalgError> {
        if self.is_square() {
            Ok(())
        } else {
            Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    /// Matrix product, checking inner dimensions.
    pub fn try_mul(&self, rhs: &Self) -> Result<Self, LinalgError> {
        if self.cols != rhs.rows {
            return Err(LinalgError::DimensionMismatch {
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a.is_zero() {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product, checking dimensions.
    pub fn try_apply(&self, k: &Ket) -> Result<Ket, LinalgError> {
        if self.cols != k.dim() {
            return Err(LinalgError::DimensionMismatch {
                left: self.shape(),
                right: (k.dim(), 1),
            });
        }
        let amps = (0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(k.amplitudes())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        Ok(Ket::from_vec_unchecked(amps))
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self, LinalgError> {
        if self.shape() != rhs.shape() {
            return Err(LinalgError::DimensionMismatch {
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self, LinalgError> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn try_sub(&self, rhs: &Self) -> Result<Self, LinalgError> {
        self.zip_with(rhs, |a, b| a - b)
    }

    /// Kronecker product; the left factor varies slowest.
    pub fn kron(&self, rhs: &Self) -> Self {
        let rows = self.rows * rhs.rows;
        let cols = self.cols * rhs.cols;
        let mut out = Self::zeros(rows, cols);
        for r1 in 0..self.rows {
            for c1 in 0..self.cols {
                let a = self[(r1, c1)];
                if a.is_zero() {
                    continue;
                }
                for r2 in 0..rhs.rows {
                    for c2 in 0..rhs.cols {
                        out[(r1 * rhs.rows + r2, c1 * rhs.cols + c2)] = a * rhs[(r2, c2)];
                    }
                }
            }
        }
        out
    }

    /// Sum of a non-empty list of equally shaped matrices.
    pub fn sum<'a>(items: impl IntoIterator<Item = &'a Self>) -> Option<Result<Self, LinalgError>> {
        let mut it = items.into_iter();
        let first = it.next()?.clone();
        Some(it.try_fold(first, |acc, m| acc.try_add(m)))
    }

    /// Hermitian part `(M + M†)/2`.
    pub fn hermitian_part(&self) -> Result<Self, LinalgError> {
        self.require_square()?;
        Ok(self.try_add(&self.adjoint())?.scale_real(0.5))
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        assert!(r < self.rows && c < self.cols, "matrix index out of range");
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        assert!(r < self.rows && c < self.cols, "matrix index out of range");
        &mut self.data[r * self.cols + c]
    }
}

// Operator impls panic on shape mismatch; fallible code uses the try_ methods.
impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        self.try_mul(rhs).expect("matrix product shape mismatch")
    }
}

impl Mul<&Ket> for &ComplexMatrix {
    type Output = Ket;
    fn mul(self, rhs: &Ket) -> Ket {
        self.try_apply(rhs).expect("matrix-vector shape mismatch")
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        self.try_add(rhs).expect("matrix sum shape mismatch")
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        self.try_sub(rhs).expect("matrix difference shape mismatch")
    }
}

/// Column vector of complex amplitudes.
#[derive(Clone, PartialEq)]
pub struct Ket {
    amps: Vec<C64>,
}

impl fmt::Debug for Ket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ket(")?;
        for (i, z) in self.amps.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{:+.6}{:+.6}i", z.re, z.im)?;
        }
        write!(f, ")")
    }
}

impl Ket {
    pub fn new(amps: Vec<C64>) -> Result<Self, LinalgError> {
        if amps.is_empty() {
            return Err(LinalgError::Empty);
        }
        check_finite(&amps)?;
        Ok(Self { amps })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self, LinalgError> {
        Self::new(amps.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub(crate) fn from_vec_unchecked(amps: Vec<C64>) -> Self {
        Self { amps }
    }

    /// Unit vector `|index⟩` in a `dim`-dimensional space.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index out of range");
        let mut amps = vec![C64::zero(); dim];
        amps[index] = C64::new(1.0, 0.0);
        Self { amps }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "ket dimension must be positive");
        Self {
            amps: vec![C64::zero(); dim],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    /// `⟨self|other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &Ket) -> Result<C64, LinalgError> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch {
                left: (self.dim(), 1),
                right: (other.dim(), 1),
            });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(C64::norm_sqr).sum()
    }

    pub fn norm(&self) -> f64 {
        Float::sqrt(self.norm_sqr())
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        Float::abs(self.norm() - 1.0) <= tol
    }

    /// Unit vector along `self`; `None` for the zero vector.
    pub fn normalized(&self) -> Option<Ket> {
        let n = self.norm();
        (n > 0.0).then(|| self.scale(C64::new(1.0 / n, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Ket {
        Ket {
            amps: self.amps.iter().map(|z| z * s).collect(),
        }
    }

    pub fn try_add(&self, other: &Ket) -> Result<Ket, LinalgError> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch {
                left: (self.dim(), 1),
                right: (other.dim(), 1),
            });
        }
        Ok(Ket {
            amps: self.amps.iter().zip(&other.amps).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn try_sub(&self, other: &Ket) -> Result<Ket, LinalgError> {
        self.try_add(&-other)
    }

    pub fn kron(&self, other: &Ket) -> Ket {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ket { amps }
    }

    /// The dyad `|self⟩⟨self|`; the projector `[ψ]` when `self` is normalized.
    pub fn projector(&self) -> ComplexMatrix {
        ComplexMatrix::dyad(self, self)
    }

    /// `⟨self|op|self⟩`.
    pub fn expectation(&self, op: &ComplexMatrix) -> Result<C64, LinalgError> {
        self.inner(&op.try_apply(self)?)
    }

    pub fn max_abs_diff(&self, other: &Ket) -> Option<f64> {
        (self.dim() == other.dim()).then(|| {
            self.amps
                .iter()
                .zip(&other.amps)
                .fold(0.0, |acc, (a, b)| acc.max((a - b).norm()))
        })
    }
}

impl Index<usize> for Ket {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.amps[i]
    }
}

impl Neg for &Ket {
    type Output = Ket;
    fn neg(self) -> Ket {
        Ket {
            amps: self.amps.iter().map(|z| -z).collect(),
        }
    }
}

/// Kronecker product shared by matrices and kets.
pub trait TensorProduct {
    fn tensor(&self, rhs: &Self) -> Self;
}

impl TensorProduct for ComplexMatrix {
    fn tensor(&self, rhs: &Self) -> Self {
        self.kron(rhs)
    }
}

impl TensorProduct for Ket {
    fn tensor(&self, rhs: &Self) -> Self {
        self.kron(rhs)
    }
}

/// Standard Kronecker product; dimensions multiply and the left factor
/// varies slowest.
pub fn tensor_product<T: TensorProduct>(a: &T, b: &T) -> T {
    a.tensor(b)
}

/// `‖ab − ba‖_max`.
pub fn commutator_norm(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64, LinalgError> {
    a.require_square()?;
    b.require_square()?;
    if a.shape() != b.shape() {
        return Err(LinalgError::DimensionMismatch {
            left: a.shape(),
            right: b.shape(),
        });
    }
    let ab = a.try_mul(b)?;
    let ba = b.try_mul(a)?;
    Ok(ab.max_abs_diff(&ba).unwrap_or(f64::INFINITY))
}

/// Identity on the `index`-th factor of a tensor layout replaced by `op`:
/// `I ⊗ … ⊗ op ⊗ … ⊗ I`.
pub fn embed_factor(dims: &[usize], index: usize, op: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    let Some(&d) = dims.get(index) else {
        return Err(LinalgError::DimensionMismatch {
            left: (dims.len(), 0),
            right: (index, 0),
        });
    };
    if op.shape() != (d, d) {
        return Err(LinalgError::DimensionMismatch {
            left: (d, d),
            right: op.shape(),
        });
    }
    let before: usize = dims[..index].iter().product();
    let after: usize = dims[index + 1..].iter().product();
    Ok(ComplexMatrix::identity(before)
        .kron(op)
        .kron(&ComplexMatrix::identity(after)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn basis_product_is_lexicographic() {
        let zp = Ket::basis(2, 0);
        let zm = Ket::basis(2, 1);
        let prod = tensor_product(&zp, &zm);
        assert_eq!(prod, Ket::from_real(&[0.0, 1.0, 0.0, 0.0]).unwrap());
    }

    #[test]
    fn identity_kron_identity() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(tensor_product(&i2, &i2), ComplexMatrix::identity(4));
    }

    #[test]
    fn singlet_from_two_products() {
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let zp = Ket::basis(2, 0);
        let zm = Ket::basis(2, 1);
        let singlet = zp.kron(&zm).try_sub(&zm.kron(&zp)).unwrap().scale(c(s, 0.0));
        let expected = Ket::from_real(&[0.0, s, -s, 0.0]).unwrap();
        assert!(singlet.max_abs_diff(&expected).unwrap() < 1e-15);
        // same ray written in the x basis (global phase −1)
        let xp = Ket::from_real(&[s, s]).unwrap();
        let xm = Ket::from_real(&[s, -s]).unwrap();
        let via_x = xp.kron(&xm).try_sub(&xm.kron(&xp)).unwrap().scale(c(s, 0.0));
        assert!(singlet.projector().max_abs_diff(&via_x.projector()).unwrap() < 1e-15);
    }

    #[test]
    fn constructors_reject_bad_input() {
        assert_eq!(ComplexMatrix::new(0, 1, vec![]), Err(LinalgError::Empty));
        assert!(matches!(
            ComplexMatrix::new(2, 2, vec![C64::zero(); 3]),
            Err(LinalgError::EntryCount { .. })
        ));
        assert_eq!(
            Ket::new(vec![c(1.0, 0.0), c(f64::NAN, 0.0)]),
            Err(LinalgError::NonFinite(1))
        );
    }

    #[test]
    fn adjoint_and_products() {
        let m =
            ComplexMatrix::from_rows(vec![vec![c(1.0, 1.0), c(0.0, 2.0)], vec![c(3.0, 0.0), c(0.0, -1.0)]]).unwrap();
        let a = m.adjoint();
        assert_eq!(a[(0, 1)], c(3.0, 0.0));
        assert_eq!(a[(1, 0)], c(0.0, -2.0));
        let k = Ket::new(vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let mk = &m * &k;
        assert_eq!(mk[0], c(1.0, 1.0) + c(0.0, 2.0) * c(0.0, 1.0));
        assert!(m.try_mul(&ComplexMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn commutator_is_symmetric_and_checks_shape() {
        let sx = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let sz = ComplexMatrix::diagonal(&[1.0, -1.0]);
        assert_eq!(commutator_norm(&sx, &sz).unwrap(), 2.0);
        assert_eq!(commutator_norm(&sz, &sx).unwrap(), 2.0);
        assert!(matches!(
            commutator_norm(&sz, &ComplexMatrix::identity(3)),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn embed_factor_places_operator() {
        let p = Ket::basis(2, 1).projector();
        let e = embed_factor(&[2, 3], 0, &p).unwrap();
        assert_eq!(e, p.kron(&ComplexMatrix::identity(3)));
        let e = embed_factor(&[3, 2], 1, &p).unwrap();
        assert_eq!(e, ComplexMatrix::identity(3).kron(&p));
        assert!(embed_factor(&[3, 2], 0, &p).is_err());
    }
}
