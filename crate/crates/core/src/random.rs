//! Seeded random operators for fixtures and property tests.

use crate::hilbert::{c, symmetrize, DenseOperator, Mat, C64};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub type Rng64 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex_matrix<R: Rng>(dim: usize, rng: &mut R) -> Mat {
    Mat::from_fn(dim, dim, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn random_operator<R: Rng>(n: usize, d: usize, rng: &mut R) -> DenseOperator {
    DenseOperator::new(n, d, complex_matrix(d.pow(n as u32), rng)).expect("square by construction")
}

pub fn random_hermitian<R: Rng>(n: usize, d: usize, rng: &mut R) -> DenseOperator {
    random_operator(n, d, rng).hermitian_part()
}

/// Positive operator with unit trace.
pub fn random_density<R: Rng>(n: usize, d: usize, rng: &mut R) -> DenseOperator {
    let a = random_operator(n, d, rng);
    let p = &a * &a.adjoint();
    let tr = p.trace().re;
    p.scale_re(1.0 / tr)
}

/// Positive, relabeling-invariant operator with unit trace.
pub fn random_symmetric_density<R: Rng>(n: usize, d: usize, rng: &mut R) -> DenseOperator {
    symmetrize(&random_density(n, d, rng))
}

pub fn random_symmetric_hermitian<R: Rng>(n: usize, d: usize, rng: &mut R) -> DenseOperator {
    symmetrize(&random_hermitian(n, d, rng))
}

/// Pure one-particle state `|ψ><ψ|` from a random unit vector.
pub fn random_pure<R: Rng>(d: usize, rng: &mut R) -> DenseOperator {
    let v: Vec<C64> = (0..d).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let m = Mat::from_fn(d, d, |i, j| v[i] * v[j].conj() / c(norm * norm));
    DenseOperator::new(1, d, m).expect("square by construction")
}
