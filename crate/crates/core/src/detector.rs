//! The two-detector receiver: efficiency responses `E_i = F_i†F_i`, their
//! factors, and the mismatch spectrum `D` (eigenvalues of `F₀ E₁⁻¹ F₀†`).

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{hermitian_eig, principal_sqrt, ComplexMatrix, HERMITIAN_TOL};

/// Eigenvalue slack allowed outside `[0, 1]` for an efficiency response.
pub const EFFICIENCY_TOL: f64 = 1e-12;
/// Relative eigenvalue cutoff below which a detector counts as singular.
pub const RANK_TOL: f64 = 1e-10;
/// Nullspace projectors closer than this (Frobenius) are considered equal.
pub const NULLSPACE_TOL: f64 = 1e-8;

/// A validated efficiency response `0 ⪯ E ⪯ I`.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyResponse {
    matrix: ComplexMatrix,
    eigenvalues: Vec<f64>,
}

impl EfficiencyResponse {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                found: matrix.cols(),
            });
        }
        let defect = matrix.hermitian_defect();
        if defect > HERMITIAN_TOL * matrix.frobenius_norm() {
            return Err(Error::InvalidEfficiency(format!(
                "not Hermitian (asymmetry {defect:.3e})"
            )));
        }
        let matrix = matrix.hermitian_part();
        for (i, z) in (0..matrix.rows()).map(|i| (i, matrix.get(i, i))) {
            if z.re < -EFFICIENCY_TOL || z.re > 1.0 + EFFICIENCY_TOL {
                return Err(Error::InvalidEfficiency(format!(
                    "diagonal entry {i} = {} is not in [0, 1]",
                    z.re
                )));
            }
        }
        let eig = hermitian_eig(&matrix)?;
        let (max, min) = (eig.max_eigenvalue(), eig.min_eigenvalue());
        if min < -EFFICIENCY_TOL || max > 1.0 + EFFICIENCY_TOL {
            return Err(Error::InvalidEfficiency(format!(
                "eigenvalues [{min}, {max}] are not within [0, 1]"
            )));
        }
        Ok(Self {
            matrix,
            eigenvalues: eig.eigenvalues,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn is_full_rank(&self) -> bool {
        let cutoff = RANK_TOL * self.matrix.frobenius_norm();
        let min = *self.eigenvalues.last().expect("non-empty");
        min > cutoff && min > 0.0
    }

    /// Projector onto the numerical nullspace.
    pub fn nullspace_projector(&self) -> Result<ComplexMatrix> {
        let cutoff = RANK_TOL * self.matrix.frobenius_norm();
        let eig = hermitian_eig(&self.matrix)?;
        Ok(eig.reconstruct_with(|x| if x <= cutoff { 1.0 } else { 0.0 }))
    }
}

/// Both detectors with factors `F_i` (principal square roots unless supplied).
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorPair {
    responses: [EfficiencyResponse; 2],
    factors: [ComplexMatrix; 2],
    full_rank: [bool; 2],
}

impl DetectorPair {
    /// Builds a pair from explicit factors, `E_i = F_i†F_i`.
    pub fn from_factors(f0: ComplexMatrix, f1: ComplexMatrix) -> Result<Self> {
        let e0 = EfficiencyResponse::new((&f0.adjoint() * &f0).hermitian_part())?;
        let e1 = EfficiencyResponse::new((&f1.adjoint() * &f1).hermitian_part())?;
        if e0.dim() != e1.dim() || f0.rows() != e0.dim() || f1.rows() != e1.dim() {
            return Err(Error::DimensionMismatch {
                expected: e0.dim(),
                found: e1.dim(),
            });
        }
        let full_rank = [e0.is_full_rank(), e1.is_full_rank()];
        Ok(Self {
            responses: [e0, e1],
            factors: [f0, f1],
            full_rank,
        })
    }

    pub fn dim(&self) -> usize {
        self.responses[0].dim()
    }

    pub fn response(&self, detector: usize) -> &EfficiencyResponse {
        &self.responses[detector]
    }

    pub fn efficiency(&self, detector: usize) -> &ComplexMatrix {
        self.responses[detector].matrix()
    }

    pub fn factor(&self, detector: usize) -> &ComplexMatrix {
        &self.factors[detector]
    }

    pub fn is_full_rank(&self, detector: usize) -> bool {
        self.full_rank[detector]
    }

    pub fn both_full_rank(&self) -> bool {
        self.full_rank[0] && self.full_rank[1]
    }

    pub fn require_full_rank(&self) -> Result<()> {
        match self.full_rank {
            [false, _] => Err(Error::SingularDetector { detector: 0 }),
            [_, false] => Err(Error::SingularDetector { detector: 1 }),
            _ => Ok(()),
        }
    }

    /// When both detectors are singular with the same nullspace, restricts the
    /// pair to the common range. Returns `None` otherwise.
    pub fn deflate_common_nullspace(&self) -> Result<Option<DetectorPair>> {
        if self.full_rank[0] || self.full_rank[1] {
            return Ok(None);
        }
        let p0 = self.responses[0].nullspace_projector()?;
        let p1 = self.responses[1].nullspace_projector()?;
        if (&p0 - &p1).frobenius_norm() > NULLSPACE_TOL {
            return Ok(None);
        }
        let eig = hermitian_eig(&p0)?;
        // Range vectors are the eigenvectors of the projector with eigenvalue 0.
        let range: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&k| eig.eigenvalues[k] < 0.5)
            .collect();
        if range.is_empty() {
            return Ok(None);
        }
        let v = eig.eigenvectors.inner();
        let q = ComplexMatrix::new(DMatrix::from_fn(self.dim(), range.len(), |i, j| {
            v[(i, range[j])]
        }))?;
        let restrict = |e: &ComplexMatrix| (&(&q.adjoint() * e) * &q).hermitian_part();
        let reduced = load_pair(&restrict(self.efficiency(0)), &restrict(self.efficiency(1)))?;
        Ok(Some(reduced))
    }
}

/// Efficiency ratios `D_i > 0` with the unitary `U` of `F₀ E₁⁻¹ F₀† = U D U†`.
#[derive(Debug, Clone, PartialEq)]
pub struct MismatchSpectrum {
    pub ratios: Vec<f64>,
    pub basis: ComplexMatrix,
}

impl MismatchSpectrum {
    pub fn dim(&self) -> usize {
        self.ratios.len()
    }

    /// `max_i max(D_i, 1/D_i)`.
    pub fn max_ratio(&self) -> f64 {
        self.ratios
            .iter()
            .map(|&x| x.max(1.0 / x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `min_i min(D_i, 1/D_i)`.
    pub fn min_ratio(&self) -> f64 {
        self.ratios
            .iter()
            .map(|&x| x.min(1.0 / x))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Validates two raw efficiency matrices and factors them with principal
/// square roots.
pub fn load_pair(e0_raw: &ComplexMatrix, e1_raw: &ComplexMatrix) -> Result<DetectorPair> {
    if e0_raw.rows() != e1_raw.rows() || e0_raw.cols() != e1_raw.cols() {
        return Err(Error::DimensionMismatch {
            expected: e0_raw.rows(),
            found: e1_raw.rows(),
        });
    }
    let e0 = EfficiencyResponse::new(e0_raw.clone())?;
    let e1 = EfficiencyResponse::new(e1_raw.clone())?;
    let f0 = principal_sqrt(e0.matrix())?;
    let f1 = principal_sqrt(e1.matrix())?;
    let full_rank = [e0.is_full_rank(), e1.is_full_rank()];
    Ok(DetectorPair {
        responses: [e0, e1],
        factors: [f0, f1],
        full_rank,
    })
}

pub fn mismatch_spectrum(pair: &DetectorPair) -> Result<MismatchSpectrum> {
    pair.require_full_rank()?;
    let f0 = pair.factor(0);
    let e1_inv = pair.efficiency(1).hermitian_inverse()?;
    let m = (&(f0 * &e1_inv) * &f0.adjoint()).hermitian_part();
    let eig = hermitian_eig(&m)?;
    if let Some(&bad) = eig.eigenvalues.iter().find(|&&x| x <= 0.0) {
        return Err(Error::NumericalFailure(format!(
            "non-positive efficiency ratio {bad:.3e}"
        )));
    }
    Ok(MismatchSpectrum {
        ratios: eig.eigenvalues,
        basis: eig.eigenvectors,
    })
}

/// Exchanges the roles of detectors 0 and 1.
pub fn swap_detectors(pair: &DetectorPair) -> DetectorPair {
    DetectorPair {
        responses: [pair.responses[1].clone(), pair.responses[0].clone()],
        factors: [pair.factors[1].clone(), pair.factors[0].clone()],
        full_rank: [pair.full_rank[1], pair.full_rank[0]],
    }
}

/// On-disk detector description (JSON). Complex entries are `[re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub dimension: usize,
    #[serde(rename = "E0")]
    pub e0: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "E1")]
    pub e1: Vec<Vec<[f64; 2]>>,
    #[serde(default = "default_label0")]
    pub label0: String,
    #[serde(default = "default_label1")]
    pub label1: String,
}

fn default_label0() -> String {
    "detector 0".into()
}

fn default_label1() -> String {
    "detector 1".into()
}

impl DetectorSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn from_pair(pair: &DetectorPair, label0: &str, label1: &str) -> Self {
        Self {
            dimension: pair.dim(),
            e0: pair.efficiency(0).to_pair_rows(),
            e1: pair.efficiency(1).to_pair_rows(),
            label0: label0.into(),
            label1: label1.into(),
        }
    }

    pub fn matrices(&self) -> Result<(ComplexMatrix, ComplexMatrix)> {
        let convert = |rows: &[Vec<[f64; 2]>], name: &str| -> Result<ComplexMatrix> {
            if rows.len() != self.dimension || rows.iter().any(|r| r.len() != self.dimension) {
                return Err(Error::Parse(format!(
                    "{name} is not {d}x{d}",
                    d = self.dimension
                )));
            }
            let rows: Vec<Vec<Complex64>> = rows
                .iter()
                .map(|r| r.iter().map(|[re, im]| Complex64::new(*re, *im)).collect())
                .collect();
            ComplexMatrix::from_rows(&rows)
        };
        Ok((convert(&self.e0, "E0")?, convert(&self.e1, "E1")?))
    }

    pub fn to_pair(&self) -> Result<DetectorPair> {
        let (e0, e1) = self.matrices()?;
        load_pair(&e0, &e1)
    }
}
