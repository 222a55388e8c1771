use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::{ComplexMatrix, Ket, LinalgError, C64};

const MAX_SWEEPS: usize = 100;

/// One eigenvalue together with the projector onto its eigenspace.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenGroup {
    pub eigenvalue: f64,
    pub projector: ComplexMatrix,
    pub multiplicity: usize,
}

/// Spectral decomposition `m = Σ λ_g P_g` with distinct, descending `λ_g`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub groups: Vec<EigenGroup>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.groups[0].projector.rows()
    }

    pub fn eigenvalues(&self) -> impl Iterator<Item = f64> + '_ {
        self.groups.iter().map(|g| g.eigenvalue)
    }

    /// `Σ λ_g P_g`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.dim();
        self.groups.iter().fold(ComplexMatrix::zeros(n, n), |acc, g| {
            &acc + &g.projector.scale_real(g.eigenvalue)
        })
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        self.groups.last().map_or(0.0, |g| g.eigenvalue)
    }
}

/// Diagonalizes a Hermitian matrix and merges eigenvalues that lie within
/// `group_tol` of their neighbour into a single projector group.
///
/// Groups come back sorted by descending eigenvalue. Eigenvector phases are
/// not canonicalized; only the phase-free projectors are exposed.
pub fn hermitian_eigendecomposition(m: &ComplexMatrix, group_tol: f64) -> Result<EigenSystem, LinalgError> {
    m.require_square()?;
    let n = m.rows();
    let defect = m.hermitian_defect()?;
    if defect > crate::tolerance::NUMERIC_TOL {
        return Err(LinalgError::NotHermitian { max_asymmetry: defect });
    }
    let (values, vectors) = jacobi(m.hermitian_part()?)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let mut groups: Vec<EigenGroup> = Vec::new();
    let mut members: Vec<usize> = Vec::new();
    let flush = |members: &mut Vec<usize>, groups: &mut Vec<EigenGroup>| {
        if members.is_empty() {
            return;
        }
        let mut projector = ComplexMatrix::zeros(n, n);
        let mut sum = 0.0;
        for &i in members.iter() {
            let v: Ket = vectors.column(i);
            projector = &projector + &v.projector();
            sum += values[i];
        }
        groups.push(EigenGroup {
            eigenvalue: sum / members.len() as f64,
            projector,
            multiplicity: members.len(),
        });
        members.clear();
    };
    for (pos, &i) in order.iter().enumerate() {
        if pos > 0 && values[order[pos - 1]] - values[i] > group_tol {
            flush(&mut members, &mut groups);
        }
        members.push(i);
    }
    flush(&mut members, &mut groups);
    Ok(EigenSystem { groups })
}

/// Cyclic Jacobi sweeps on a Hermitian matrix. Each rotation first removes
/// the phase of the pivot `a_pq` and then applies the real symmetric Jacobi
/// rotation that annihilates it. Returns eigenvalues and the unitary whose
/// columns are the eigenvectors.
fn jacobi(mut a: ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix), LinalgError> {
    let n = a.rows();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.entries().iter().map(C64::norm_sqr).sum::<f64>().sqrt();
    if n == 1 || scale == 0.0 {
        return Ok(((0..n).map(|i| a[(i, i)].re).collect(), v));
    }
    let threshold = (f64::EPSILON * scale).powi(2);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| a[(r, c)].norm_sqr())
            .sum();
        if off <= threshold {
            return Ok(((0..n).map(|i| a[(i, i)].re).collect(), v));
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= f64::MIN_POSITIVE {
                    continue;
                }
                let phase = apq / r;
                let theta = (a[(q, q)].re - a[(p, p)].re) / (2.0 * r);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // G = diag(1, e^{-iφ}) · [[c, s], [-s, c]] restricted to (p, q).
                let g_pp = C64::new(c, 0.0);
                let g_pq = C64::new(s, 0.0);
                let g_qp = -phase.conj() * s;
                let g_qq = phase.conj() * c;

                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = akp * g_pp + akq * g_qp;
                    a[(k, q)] = akp * g_pq + akq * g_qq;
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vkp * g_pp + vkq * g_qp;
                    v[(k, q)] = vkp * g_pq + vkq * g_qq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
                    a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)].im = 0.0;
                a[(q, q)].im = 0.0;
            }
        }
    }
    Err(LinalgError::NumericalFailure { sweeps: MAX_SWEEPS })
}
