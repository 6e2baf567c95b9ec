//! Seeded random generators for states, vectors and measurements.
//!
//! Every sampler takes the generator explicitly; nothing here touches global
//! entropy.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::qmat::{c, cr, BipartiteState, CMat, CVec, HermitianOperator};

pub type SeededRng = ChaCha20Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Standard complex Gaussian with `E|z|^2 = 1`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> num_complex::Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    let mut m = CMat::zeros(rows, cols);
    // Column-major fill keeps the draw order independent of nalgebra internals.
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = complex_gaussian(rng);
        }
    }
    m
}

/// Haar-distributed unit vector: a normalized complex Gaussian vector.
pub fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVec {
    loop {
        let v = CVec::from_iterator(d, (0..d).map(|_| complex_gaussian(rng)));
        let n = v.norm();
        if n > 1e-300 {
            return v.unscale(n);
        }
    }
}

/// Haar-random unitary from a QR factorization with the phases of `R`'s
/// diagonal pushed into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let g = ginibre(d, d, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { cr(1.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> HermitianOperator {
    let g = ginibre(d, d, rng);
    HermitianOperator::hermitize(g)
}

/// Random positive semidefinite operator of the given rank.
pub fn random_psd<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> HermitianOperator {
    let g = ginibre(d, rank, rng);
    HermitianOperator::hermitize(&g * g.adjoint())
}

/// Random full-rank mixed state (Hilbert-Schmidt measure).
pub fn random_state<R: Rng + ?Sized>(dim_a: usize, dim_b: usize, rng: &mut R) -> BipartiteState {
    let n = dim_a * dim_b;
    let p = random_psd(n, n, rng);
    BipartiteState::from_unnormalized(p, dim_a, dim_b).expect("Ginibre states are valid")
}

/// Random density operator of dimension `d`.
pub fn random_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> HermitianOperator {
    let p = random_psd(d, d, rng);
    let tr = p.trace();
    p.scale(1.0 / tr)
}

/// Random POVM elements `S^{-1/2} G_i S^{-1/2}` with `S = sum_i G_i`.
pub fn random_povm_elements<R: Rng + ?Sized>(d: usize, outcomes: usize, rng: &mut R) -> Vec<HermitianOperator> {
    // The last element is full rank so the sum is invertible.
    let raw: Vec<HermitianOperator> = (0..outcomes)
        .map(|i| {
            let rank = if i + 1 == outcomes { d } else { 1 + rng.random_range(0..d) };
            random_psd(d, rank, rng)
        })
        .collect();
    let mut sum = HermitianOperator::zeros(d);
    for g in &raw {
        sum = &sum + g;
    }
    let (vals, vecs) = sum.eigh().expect("eigensolve of random PSD sum");
    let inv_sqrt = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        d,
        vals.iter().map(|&v| cr(1.0 / v.max(1e-300).sqrt())),
    ));
    let s = &vecs * inv_sqrt * vecs.adjoint();
    raw.iter().map(|g| g.conjugate_by(&s)).collect()
}

/// Random contraction `K` (`dim_out x dim_in`) with operator norm at most
/// `max_norm`, a valid single-Kraus filter.
pub fn random_contraction<R: Rng + ?Sized>(dim_out: usize, dim_in: usize, max_norm: f64, rng: &mut R) -> CMat {
    let g = ginibre(dim_out, dim_in, rng);
    let svals = g.clone().singular_values();
    let top = svals.iter().cloned().fold(0.0, f64::max);
    let target = max_norm * rng.random_range(0.3..1.0);
    g.map(|z| z * (target / top))
}
