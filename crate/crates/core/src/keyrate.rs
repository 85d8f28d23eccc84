//! Final key rates per detected signal.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RateMethod {
    Noiseless,
    NoisyOptimized,
    NoisyBounds,
    FourPhase,
    ScalarDiscarding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyRateReport {
    /// `max(0, rate_raw)`.
    pub rate: f64,
    pub rate_raw: f64,
    pub p_succ: f64,
    pub e_p: f64,
    pub e_b: f64,
    /// Bits left after privacy amplification, `p_succ (1 − H₂(e_p))`.
    pub k_pa_fraction: f64,
    /// Bits spent on error correction, `H₂(e_b)`.
    pub k_ec_fraction: f64,
    pub method: RateMethod,
}

fn check_unit(name: &'static str, value: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::DomainError { name, value });
    }
    Ok(value)
}

pub fn binary_entropy(x: f64) -> Result<f64> {
    check_unit("x", x)?;
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

fn entropy(x: f64) -> f64 {
    binary_entropy(x).expect("checked by caller")
}

fn report(p_succ: f64, e_p: f64, e_b: f64, method: RateMethod) -> KeyRateReport {
    // A phase error bound past 1/2 certifies nothing.
    let k_pa_fraction = p_succ * (1.0 - entropy(e_p.min(0.5)));
    let k_ec_fraction = entropy(e_b);
    let rate_raw = k_pa_fraction - k_ec_fraction;
    KeyRateReport {
        rate: rate_raw.max(0.0),
        rate_raw,
        p_succ,
        e_p,
        e_b,
        k_pa_fraction,
        k_ec_fraction,
        method,
    }
}

/// `p_succ (1 − H₂(e_p)) − H₂(e_b)`.
pub fn noisy_rate(p_succ: f64, e_p: f64, e_b: f64) -> Result<KeyRateReport> {
    noisy_rate_with(p_succ, e_p, e_b, RateMethod::NoisyOptimized)
}

/// As [`noisy_rate`], labelled with the method that produced the inputs.
pub fn noisy_rate_with(
    p_succ: f64,
    e_p: f64,
    e_b: f64,
    method: RateMethod,
) -> Result<KeyRateReport> {
    check_unit("p_succ", p_succ)?;
    check_unit("e_p", e_p)?;
    check_unit("e_b", e_b)?;
    Ok(report(p_succ, e_p, e_b, method))
}

/// Rate when Bob randomly swaps the bit assignment of his detectors:
/// `1 − H₂(e_p) − H₂(e_b)` whatever the detectors.
pub fn four_phase_rate(e_b: f64, e_p: f64) -> Result<KeyRateReport> {
    check_unit("e_b", e_b)?;
    check_unit("e_p", e_p)?;
    let k_pa_fraction = 1.0 - entropy(e_p);
    let k_ec_fraction = entropy(e_b);
    let rate_raw = k_pa_fraction - k_ec_fraction;
    Ok(KeyRateReport {
        rate: rate_raw.max(0.0),
        rate_raw,
        p_succ: 1.0,
        e_p,
        e_b,
        k_pa_fraction,
        k_ec_fraction,
        method: RateMethod::FourPhase,
    })
}

/// Rates for constant efficiencies `η₀, η₁`: discarding clicks down to the
/// weaker detector, and the general method.
pub fn scalar_reference_rates(
    eta0: f64,
    eta1: f64,
    e_b: f64,
    e_p: f64,
) -> Result<(KeyRateReport, KeyRateReport)> {
    for (name, eta) in [("eta0", eta0), ("eta1", eta1)] {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::DomainError { name, value: eta });
        }
    }
    check_unit("e_b", e_b)?;
    check_unit("e_p", e_p)?;
    let s = 2.0 * eta0.min(eta1) / (eta0 + eta1);
    let (hp, hb) = (entropy(e_p), entropy(e_b));
    let discarding_raw = s * (1.0 - hp - hb);
    let discarding = KeyRateReport {
        rate: discarding_raw.max(0.0),
        rate_raw: discarding_raw,
        p_succ: s,
        e_p,
        e_b,
        k_pa_fraction: s * (1.0 - hp),
        k_ec_fraction: s * hb,
        method: RateMethod::ScalarDiscarding,
    };
    let general_raw = s * (1.0 - hp) - hb;
    let general = KeyRateReport {
        rate: general_raw.max(0.0),
        rate_raw: general_raw,
        p_succ: s,
        e_p,
        e_b,
        k_pa_fraction: s * (1.0 - hp),
        k_ec_fraction: hb,
        method: RateMethod::NoisyOptimized,
    };
    Ok((discarding, general))
}
