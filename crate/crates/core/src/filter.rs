//! Bob's virtual filter and the noiseless key rate.
//!
//! The filter applies `C F_i⁻¹` on the branch where detector `i` clicked. With
//! `C = diag(√min(1/D_i, 1)) U† F₀` it is a valid (contractive) operation and
//! turns the mismatched state back into a perfect EPR pair on success. The
//! worst-case success probability over Eve's auxiliary state is the noiseless
//! key rate.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::detector::{mismatch_spectrum, DetectorPair, MismatchSpectrum};
use crate::error::{Error, Result};
use crate::matrix::{hermitian_eig, ComplexMatrix, ORDER_TOL};
use crate::random;

/// The matrix `C` of the virtual filter together with its validity check.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualFilterC {
    pub c: ComplexMatrix,
    /// Diagonal of the rescaled filter, `√min(1/(1+D_i), D_i/(1+D_i))`.
    pub c2_diag: Vec<f64>,
    /// `C†C`, independent of the choice of factors `F_i`.
    pub gram: ComplexMatrix,
    /// `1 - max(λ_max(C E₀⁻¹ C†), λ_max(C E₁⁻¹ C†))`.
    pub validity_margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ZeroReason {
    SingularDetector,
    DiagonalOnlyKnowledge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Knowledge {
    FullMatrices,
    DiagonalOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiselessRate {
    pub rate: f64,
    /// `max_i max(D_i, 1/D_i)`; infinite when the rate is provably zero.
    pub limiting_ratio: f64,
    pub zero_reason: Option<ZeroReason>,
}

impl NoiselessRate {
    fn zero(reason: ZeroReason) -> Self {
        Self {
            rate: 0.0,
            limiting_ratio: f64::INFINITY,
            zero_reason: Some(reason),
        }
    }
}

pub fn compute_c(spectrum: &MismatchSpectrum, pair: &DetectorPair) -> Result<VirtualFilterC> {
    pair.require_full_rank()?;
    if spectrum.dim() != pair.dim() {
        return Err(Error::DimensionMismatch {
            expected: pair.dim(),
            found: spectrum.dim(),
        });
    }
    let scales: Vec<f64> = spectrum
        .ratios
        .iter()
        .map(|&d| (1.0 / d).min(1.0).sqrt())
        .collect();
    let c2_diag = spectrum
        .ratios
        .iter()
        .map(|&d| (1.0 / (1.0 + d)).min(d / (1.0 + d)).sqrt())
        .collect();
    let c =
        &(&ComplexMatrix::from_real_diagonal(&scales) * &spectrum.basis.adjoint()) * pair.factor(0);
    let gram = (&c.adjoint() * &c).hermitian_part();

    let mut worst = f64::NEG_INFINITY;
    for detector in 0..2 {
        let inv = pair.efficiency(detector).hermitian_inverse()?;
        let block = (&(&c * &inv) * &c.adjoint()).hermitian_part();
        worst = worst.max(hermitian_eig(&block)?.max_eigenvalue());
    }
    let validity_margin = 1.0 - worst;
    if validity_margin < -ORDER_TOL {
        return Err(Error::NumericalFailure(format!(
            "virtual filter is not contractive (margin {validity_margin:.3e})"
        )));
    }
    Ok(VirtualFilterC {
        c,
        c2_diag,
        gram,
        validity_margin,
    })
}

/// `2 / (1 + max_i max(D_i, 1/D_i))`.
pub fn noiseless_rate(spectrum: &MismatchSpectrum) -> NoiselessRate {
    let limiting_ratio = spectrum.max_ratio();
    NoiselessRate {
        rate: 2.0 / (1.0 + limiting_ratio),
        limiting_ratio,
        zero_reason: None,
    }
}

/// Success probability of the virtual filter for Eve's auxiliary state `γ`:
/// `2⟨γ|C†C|γ⟩ / ⟨γ|E₀ + E₁|γ⟩`.
pub fn filter_success_probability(
    pair: &DetectorPair,
    filter: &VirtualFilterC,
    gamma: &DVector<Complex64>,
) -> f64 {
    let num = quadratic(filter.gram.inner(), gamma);
    let den =
        quadratic(pair.efficiency(0).inner(), gamma) + quadratic(pair.efficiency(1).inner(), gamma);
    2.0 * num / den
}

fn quadratic(a: &nalgebra::DMatrix<Complex64>, v: &DVector<Complex64>) -> f64 {
    v.dotc(&(a * v)).re
}

const BRUTEFORCE_SEED: u64 = 0x5eed_0fc0_ffee;

/// Independent estimate of the noiseless rate: minimizes the filter success
/// probability over random pure states, each refined by coordinate descent.
pub fn noiseless_rate_bruteforce(
    pair: &DetectorPair,
    filter: &VirtualFilterC,
    samples: usize,
) -> Result<f64> {
    pair.require_full_rank()?;
    if samples < 1000 {
        return Err(Error::DomainError {
            name: "samples",
            value: samples as f64,
        });
    }
    let d = pair.dim();
    let best = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(BRUTEFORCE_SEED);
            rng.set_stream(k as u64);
            let start = random::unit_vector(&mut rng, d);
            coordinate_descent(pair, filter, start)
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(best)
}

fn coordinate_descent(
    pair: &DetectorPair,
    filter: &VirtualFilterC,
    mut gamma: DVector<Complex64>,
) -> f64 {
    let eval = |g: &DVector<Complex64>| filter_success_probability(pair, filter, g);
    let mut best = eval(&gamma);
    let mut step = 0.5;
    while step > 1e-9 {
        let mut improved = false;
        for i in 0..gamma.len() {
            for delta in [
                Complex64::new(step, 0.0),
                Complex64::new(-step, 0.0),
                Complex64::new(0.0, step),
                Complex64::new(0.0, -step),
            ] {
                let mut trial = gamma.clone();
                trial[i] += delta;
                let value = eval(&trial);
                if value < best {
                    best = value;
                    gamma = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

/// Noiseless rate including the provably-zero cases: singular detectors with
/// different nullspaces, and detectors known only through their diagonals.
pub fn special_case_rate(pair: &DetectorPair, knowledge: Knowledge) -> Result<NoiselessRate> {
    if !pair.both_full_rank() {
        return match pair.deflate_common_nullspace()? {
            Some(reduced) => special_case_rate(&reduced, knowledge),
            None => Ok(NoiselessRate::zero(ZeroReason::SingularDetector)),
        };
    }
    if knowledge == Knowledge::DiagonalOnly && pair.dim() >= 2 {
        return Ok(NoiselessRate::zero(ZeroReason::DiagonalOnlyKnowledge));
    }
    Ok(noiseless_rate(&mismatch_spectrum(pair)?))
}
