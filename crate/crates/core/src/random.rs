//! Seeded random matrix generators used by tests, scenario generation and the
//! verification suite.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform in `[-scale, scale]`.
pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * rng.random_range(-1.0..=1.0))
}

pub fn random_symmetric<R: Rng>(rng: &mut R, order: usize, scale: f64) -> DMatrix<f64> {
    let m = random_matrix(rng, order, order, scale);
    (&m + m.transpose()) * 0.5
}

pub fn random_antisymmetric<R: Rng>(rng: &mut R, order: usize, scale: f64) -> DMatrix<f64> {
    let m = random_matrix(rng, order, order, scale);
    (&m - m.transpose()) * 0.5
}

/// `MMᵀ/order + shift·I`: positive definite for `shift > 0`.
pub fn random_psd<R: Rng>(rng: &mut R, order: usize, shift: f64) -> DMatrix<f64> {
    let m = random_matrix(rng, order, order, 1.0);
    &m * m.transpose() / order as f64 + DMatrix::identity(order, order) * shift
}
