#![allow(dead_code)]

use kkt_spectra::SymMat;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_sym(rng: &mut ChaCha8Rng, p: usize) -> SymMat {
    SymMat::from_fn(p, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_orthogonal(rng: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

/// `Q diag(l) Q^T` with `l` holding `na` positive, `nb` zero and `ng`
/// negative entries, each of magnitude in `[0.5, 3]`.
pub fn structured(rng: &mut ChaCha8Rng, na: usize, nb: usize, ng: usize) -> SymMat {
    let mut l: Vec<f64> = Vec::new();
    l.extend((0..na).map(|_| rng.random_range(0.5..3.0)));
    l.extend(std::iter::repeat_n(0.0, nb));
    l.extend((0..ng).map(|_| -rng.random_range(0.5..3.0)));
    let q = random_orthogonal(rng, l.len());
    SymMat::from_diag(&l).conjugate(&q)
}

/// Random partition sizes summing to `p >= 1`.
pub fn partition(rng: &mut ChaCha8Rng, p: usize) -> (usize, usize, usize) {
    let na = rng.random_range(0..=p);
    let nb = rng.random_range(0..=p - na);
    (na, nb, p - na - nb)
}
