//! Eve's collective-attack state and the rate statistics it induces.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::basis::{XMM, XMP, XPM, XPP, Z00, Z01, Z10, Z11};
use super::form::Form;
use crate::detector::{DetectorPair, MismatchSpectrum};
use crate::error::{Error, Result};
use crate::filter::VirtualFilterC;
use crate::matrix::ComplexMatrix;

/// Relative size below which a denominator counts as zero.
pub const DENOMINATOR_TOL: f64 = 1e-14;

/// `ρ_E = Σ_k |φ_k⟩⟨φ_k|` on `ℂ⁴ ⊗ ℂᵈ`, vectors unnormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct EveState {
    dim: usize,
    vectors: Vec<DVector<Complex64>>,
}

impl EveState {
    pub fn new(vectors: Vec<DVector<Complex64>>) -> Result<Self> {
        let dim = vectors
            .first()
            .map(|v| v.len())
            .ok_or_else(|| Error::InvalidMatrix("state needs at least one vector".into()))?;
        if dim == 0 || dim % 4 != 0 {
            return Err(Error::InvalidMatrix(format!(
                "state dimension {dim} is not a positive multiple of 4"
            )));
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        if vectors.iter().any(|v| v.iter().any(|z| !z.is_finite())) {
            return Err(Error::InvalidMatrix("state has non-finite entries".into()));
        }
        if vectors.iter().all(|v| v.norm() == 0.0) {
            return Err(Error::InvalidMatrix("state is zero".into()));
        }
        Ok(Self { dim, vectors })
    }

    /// `|e_a⟩ ⊗ |γ⟩` for coordinate `a` of the 4-dimensional factor.
    pub fn product(axis: [f64; 4], aux: &DVector<Complex64>) -> Result<Self> {
        let d = aux.len();
        let v = DVector::from_fn(4 * d, |i, _| aux[i % d] * axis[i / d]);
        Self::new(vec![v])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn aux_dim(&self) -> usize {
        self.dim / 4
    }

    pub fn rank(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[DVector<Complex64>] {
        &self.vectors
    }

    /// `Tr ρ_E`.
    pub fn trace(&self) -> f64 {
        self.vectors.iter().map(|v| v.norm_squared()).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            vectors: self
                .vectors
                .iter()
                .map(|v| v * Complex64::new(factor, 0.0))
                .collect(),
        }
    }

    pub fn density_matrix(&self) -> ComplexMatrix {
        let mut rho = DMatrix::zeros(self.dim, self.dim);
        for v in &self.vectors {
            rho += v * v.adjoint();
        }
        ComplexMatrix::new(rho).expect("finite state")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateStatistics {
    pub e_b: f64,
    pub e_p_prime: f64,
    pub e_p: f64,
    pub p_succ: f64,
}

/// Numerators and denominators of the four statistics.
#[derive(Debug, Clone)]
pub(crate) struct StatisticForms {
    pub eb_num: Form,
    pub z_den: Form,
    pub ep_num: Form,
    pub ep_den: Form,
    pub epp_num: Form,
    pub x_den: Form,
}

impl StatisticForms {
    pub fn new(pair: &DetectorPair, filter: &VirtualFilterC) -> Self {
        let d = pair.dim();
        let e0 = pair.efficiency(0).inner();
        let e1 = pair.efficiency(1).inner();
        let k = filter.gram.inner();
        Self {
            eb_num: Form::new(d)
                .add_half_projector(Z10, e0)
                .add_half_projector(Z01, e1),
            z_den: Form::new(d)
                .add_half_projector(Z00, e0)
                .add_half_projector(Z10, e0)
                .add_half_projector(Z11, e1)
                .add_half_projector(Z01, e1),
            ep_num: Form::new(d)
                .add_half_projector(XMP, k)
                .add_half_projector(XPM, k),
            ep_den: Form::new(d).add_identity(k),
            epp_num: Form::new(d)
                .add_half_projector(XMP, e0)
                .add_half_projector(XPM, e1),
            x_den: Form::new(d)
                .add_half_projector(XPP, e0)
                .add_half_projector(XMP, e0)
                .add_half_projector(XMM, e1)
                .add_half_projector(XPM, e1),
        }
    }

    pub fn map(&self, f: impl Fn(&Form) -> Form) -> Self {
        Self {
            eb_num: f(&self.eb_num),
            z_den: f(&self.z_den),
            ep_num: f(&self.ep_num),
            ep_den: f(&self.ep_den),
            epp_num: f(&self.epp_num),
            x_den: f(&self.x_den),
        }
    }
}

fn ratio(num: f64, den: f64, trace: f64, quantity: &'static str) -> Result<f64> {
    if !(den > DENOMINATOR_TOL * trace) {
        return Err(Error::ZeroDenominator { quantity });
    }
    Ok(num / den)
}

pub fn evaluate_statistics(
    state: &EveState,
    pair: &DetectorPair,
    filter: &VirtualFilterC,
) -> Result<RateStatistics> {
    pair.require_full_rank()?;
    if state.dim() != 4 * pair.dim() {
        return Err(Error::DimensionMismatch {
            expected: 4 * pair.dim(),
            found: state.dim(),
        });
    }
    let forms = StatisticForms::new(pair, filter);
    let total = |form: &Form| -> f64 {
        state
            .vectors()
            .iter()
            .map(|v| form.value(v.as_slice()))
            .sum()
    };
    let trace = state.trace();
    let z_den = total(&forms.z_den);
    let ep_den = total(&forms.ep_den);
    Ok(RateStatistics {
        e_b: ratio(total(&forms.eb_num), z_den, trace, "e_b")?,
        e_p_prime: ratio(
            total(&forms.epp_num),
            total(&forms.x_den),
            trace,
            "e_p_prime",
        )?,
        e_p: ratio(total(&forms.ep_num), ep_den, trace, "e_p")?,
        p_succ: ratio(ep_den, z_den, trace, "p_succ")?,
    })
}

/// `(min_i min(D_i, 1/D_i), max_i max(D_i, 1/D_i))`: the lowest filtering
/// probability and the largest phase-error amplification over all states.
pub fn suboptimal_bounds(spectrum: &MismatchSpectrum) -> (f64, f64) {
    let upper = spectrum.max_ratio();
    (1.0 / upper, upper)
}

/// Whether `a1/a2 ≥ b1/b2` implies `a1/a2 ≥ (a1+b1)/(a2+b2)`.
pub fn mediant_check(a1: f64, a2: f64, b1: f64, b2: f64) -> Result<bool> {
    if !(a1 > 0.0 && a2 > 0.0 && b1 > 0.0 && b2 > 0.0) {
        return Err(Error::NonPositiveInput);
    }
    // Cross-multiplied so rounding in the quotients cannot flip the verdict.
    let premise = a1 * b2 >= b1 * a2;
    let conclusion = a1 * (a2 + b2) >= (a1 + b1) * a2;
    Ok(!premise || conclusion)
}
