// Random operators for property tests. Shared between unit tests (via
// `#[path]`) and integration tests; the including module must have
// `ComplexMatrix`, `C64` and `hermitize` in scope.

#![allow(dead_code)]

use rand::Rng;

use super::{hermitize, ComplexMatrix, C64};

pub fn random_matrix<R: Rng>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let rows: Vec<Vec<C64>> = (0..dim)
        .map(|_| {
            (0..dim)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect()
        })
        .collect();
    ComplexMatrix::from_rows(&rows).unwrap()
}

pub fn random_hermitian<R: Rng>(rng: &mut R, dim: usize) -> ComplexMatrix {
    hermitize(&random_matrix(rng, dim))
}

pub fn random_traceless_hermitian<R: Rng>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let h = random_hermitian(rng, dim);
    let shift = h.trace().re / dim as f64;
    hermitize(&(&h - &ComplexMatrix::identity(dim).scale(shift)))
}

pub fn random_unitary<R: Rng>(rng: &mut R, dim: usize) -> ComplexMatrix {
    random_hermitian(rng, dim).eigh().vectors
}

/// Random full-rank state. With `separated`, eigenvalues are spaced at least
/// `0.05/dim` apart and bounded below by the same amount.
pub fn random_density<R: Rng>(rng: &mut R, dim: usize, separated: bool) -> ComplexMatrix {
    let floor = if separated { 0.05 / dim as f64 } else { 0.0 };
    let mut w: Vec<f64> = (0..dim)
        .map(|k| rng.gen_range(0.0..1.0) + if separated { k as f64 } else { 0.0 })
        .collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x = floor + (1.0 - dim as f64 * floor) * *x / total;
    }
    let u = random_unitary(rng, dim);
    hermitize(&(&(&u * &ComplexMatrix::diag(&w)) * &u.dagger()))
}

/// Random state `M M† / Tr(M M†)` with a Ginibre factor `M`; eigenvalues may crowd zero.
pub fn random_mixed_state<R: Rng>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let m = random_matrix(rng, dim);
    let p = &m * &m.dagger();
    let tr = p.trace().re;
    hermitize(&p.scale(1.0 / tr))
}
