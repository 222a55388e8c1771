#![allow(dead_code)]

use histq_core::linalg::{ComplexMatrix, Ket, C64};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn c(rng: &mut impl Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn random_ket(rng: &mut impl Rng, n: usize) -> Ket {
    loop {
        let k = Ket::new((0..n).map(|_| c(rng)).collect()).unwrap();
        if k.norm() > 1e-3 {
            return k.normalized().unwrap();
        }
    }
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::new(rows, cols, (0..rows * cols).map(|_| c(rng)).collect()).unwrap()
}

pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    random_matrix(rng, n, n).hermitian_part().unwrap()
}

/// Orthonormal columns by modified Gram-Schmidt on random vectors.
pub fn random_orthonormal(rng: &mut impl Rng, n: usize, count: usize) -> Vec<Ket> {
    let mut out: Vec<Ket> = Vec::with_capacity(count);
    while out.len() < count {
        let mut v = random_ket(rng, n);
        for b in &out {
            let z = b.inner(&v).unwrap();
            v = v.try_sub(&b.scale(z)).unwrap();
        }
        if v.norm() > 1e-3 {
            out.push(v.normalized().unwrap());
        }
    }
    out
}

pub fn random_unitary(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_columns(&random_orthonormal(rng, n, n)).unwrap()
}

/// `target × source` matrix with orthonormal columns.
pub fn random_isometry(rng: &mut impl Rng, source: usize, target: usize) -> ComplexMatrix {
    ComplexMatrix::from_columns(&random_orthonormal(rng, target, source)).unwrap()
}

/// Random PDI on `C^n`: a random orthonormal basis cut into nonempty blocks.
pub fn random_pdi(rng: &mut impl Rng, n: usize) -> Vec<ComplexMatrix> {
    let basis = random_orthonormal(rng, n, n);
    let parts = rng.gen_range(1..=n);
    let mut cuts: Vec<usize> = (1..n).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts.into_iter().take(parts - 1).collect();
    cuts.sort_unstable();
    cuts.push(n);
    let mut start = 0;
    let mut out = Vec::new();
    for end in cuts {
        let mut p = ComplexMatrix::zeros(n, n);
        for b in &basis[start..end] {
            p = &p + &b.projector();
        }
        out.push(p);
        start = end;
    }
    out
}

/// Kraus operators from the row blocks of a random isometry `C^n → C^{count·n}`.
pub fn random_kraus(rng: &mut impl Rng, n: usize, count: usize) -> Vec<ComplexMatrix> {
    let v = random_isometry(rng, n, n * count);
    (0..count)
        .map(|j| {
            let mut k = ComplexMatrix::zeros(n, n);
            for r in 0..n {
                for col in 0..n {
                    k[(r, col)] = v[(j * n + r, col)];
                }
            }
            k
        })
        .collect()
}
