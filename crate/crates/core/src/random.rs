//! Seeded random matrices and states.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{self, c, CMat, C64};
use crate::state::QuantumState;

pub type SeededRng = ChaCha8Rng;

/// Deterministic generator for a seed and a named stream.
pub fn rng(seed: u64, stream: u64) -> SeededRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Complex Ginibre matrix with standard normal entries.
pub fn ginibre(n: usize, m: usize, rng: &mut impl Rng) -> CMat {
    CMat::from_fn(n, m, |_, _| c(normal(rng), normal(rng)))
}

/// GUE-like random Hermitian matrix.
pub fn hermitian(n: usize, rng: &mut impl Rng) -> CMat {
    linalg::hermitian_part(&ginibre(n, n, rng))
}

/// Haar-ish random unitary from the QR of a Ginibre matrix.
pub fn unitary(n: usize, rng: &mut impl Rng) -> CMat {
    let g = ginibre(n, n, rng);
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    // Fix column phases so the distribution does not depend on QR conventions.
    CMat::from_fn(n, n, |i, j| {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        q[(i, j)] * ph
    })
}

/// Random pure state.
pub fn pure_state(n: usize, rng: &mut impl Rng) -> QuantumState {
    let v: Vec<C64> = (0..n).map(|_| c(normal(rng), normal(rng))).collect();
    QuantumState::pure(&v).expect("nonzero random vector")
}

/// Random state of exactly the given rank (Wishart construction).
pub fn ranked_state(n: usize, rank: usize, rng: &mut impl Rng) -> QuantumState {
    assert!(rank >= 1 && rank <= n);
    let g = ginibre(n, rank, rng);
    let mut w = &g * g.adjoint();
    let tr = linalg::trace(&w).re;
    w /= c(tr, 0.0);
    linalg::symmetrize(&mut w);
    QuantumState::from_matrix_unchecked(w)
}

/// Random full-rank state with smallest eigenvalue bounded away from zero:
/// a Wishart state mixed with a little of the maximally mixed state.
pub fn full_rank_state(n: usize, rng: &mut impl Rng) -> QuantumState {
    let w = ranked_state(n, n, rng);
    let mix = 0.05;
    let m = w.matrix() * c(1.0 - mix, 0.0) + linalg::identity(n) * c(mix / n as f64, 0.0);
    QuantumState::from_matrix_unchecked(m)
}

pub fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}
