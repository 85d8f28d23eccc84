//! Random instances: Haar-ish unitaries, efficiency matrices, detector pairs
//! and pure states. Used for Monte-Carlo studies and randomized checks.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::detector::{load_pair, DetectorPair};
use crate::matrix::ComplexMatrix;

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Uniformly distributed unit vector in `C^n`.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<Complex64> {
    let v = DVector::from_fn(n, |_, _| complex_gaussian(rng));
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

/// Unitary from the QR factorization of a complex Ginibre matrix, with the
/// diagonal phases of R removed.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| complex_gaussian(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    ComplexMatrix::new(q).expect("finite unitary")
}

/// Random `E = V diag(λ) V†` with eigenvalues drawn uniformly from `[lo, hi]`.
pub fn efficiency<R: Rng + ?Sized>(rng: &mut R, d: usize, lo: f64, hi: f64) -> ComplexMatrix {
    let v = unitary(rng, d);
    let lambdas: Vec<f64> = (0..d).map(|_| rng.random_range(lo..=hi)).collect();
    let diag = ComplexMatrix::from_real_diagonal(&lambdas);
    (&(&v * &diag) * &v.adjoint()).hermitian_part()
}

/// Random full-rank pair with efficiency eigenvalues in `[0.05, 0.95]`.
pub fn full_rank_pair<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DetectorPair {
    let e0 = efficiency(rng, d, 0.05, 0.95);
    let e1 = efficiency(rng, d, 0.05, 0.95);
    load_pair(&e0, &e1).expect("random efficiencies are valid")
}

/// Random pair of diagonal efficiency matrices with entries in `[lo, hi]`.
pub fn diagonal_pair<R: Rng + ?Sized>(rng: &mut R, d: usize, lo: f64, hi: f64) -> DetectorPair {
    let e0: Vec<f64> = (0..d).map(|_| rng.random_range(lo..=hi)).collect();
    let e1: Vec<f64> = (0..d).map(|_| rng.random_range(lo..=hi)).collect();
    load_pair(
        &ComplexMatrix::from_real_diagonal(&e0),
        &ComplexMatrix::from_real_diagonal(&e1),
    )
    .expect("diagonal efficiencies are valid")
}
