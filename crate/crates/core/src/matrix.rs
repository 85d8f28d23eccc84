//! Dense complex matrices and the Hermitian decompositions everything else is
//! built on.
//!
//! Storage and the raw eigen-solver come from `nalgebra`. This module adds the
//! conventions the rest of the crate relies on: eigenvalues sorted in
//! descending order, each eigenvector's largest-magnitude entry made real and
//! nonnegative, and a fixed ordering inside degenerate eigenspaces. With those
//! conventions two calls on the same input return bit-identical results.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative tolerance for Hermitian symmetry checks.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Relative tolerance for PSD checks and clamping of tiny negative eigenvalues.
pub const PSD_TOL: f64 = 1e-12;
/// Absolute tolerance used by [`psd_leq`].
pub const ORDER_TOL: f64 = 1e-9;

/// Relative gap below which two eigenvalues are treated as degenerate when
/// ordering eigenvectors.
const DEGENERACY_TOL: f64 = 1e-12;

/// A dense complex matrix with finite entries and at least one row and column.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl ComplexMatrix {
    pub fn new(inner: DMatrix<Complex64>) -> Result<Self> {
        if inner.nrows() == 0 || inner.ncols() == 0 {
            return Err(Error::InvalidMatrix("matrix must be at least 1x1".into()));
        }
        if inner.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        Ok(Self(inner))
    }

    /// Builds a matrix from row-major rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch {
                expected: ncols,
                found: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(diag[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn inner(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Real parts of the diagonal.
    pub fn real_diagonal(&self) -> Vec<f64> {
        (0..self.rows().min(self.cols()))
            .map(|i| self.0[(i, i)].re)
            .collect()
    }

    /// Rows as `[re, im]` pairs, the layout used by the detector spec file.
    pub fn to_pair_rows(&self) -> Vec<Vec<[f64; 2]>> {
        (0..self.rows())
            .map(|i| {
                (0..self.cols())
                    .map(|j| [self.0[(i, j)].re, self.0[(i, j)].im])
                    .collect()
            })
            .collect()
    }

    /// Frobenius norm of `A - A†`.
    pub fn hermitian_defect(&self) -> f64 {
        (&self.0 - self.0.adjoint())
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.is_square() && self.hermitian_defect() <= rel_tol * self.frobenius_norm().max(1e-300)
    }

    /// `(A + A†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0))
    }

    /// General inverse (LU). Fails with `NumericalFailure` for singular input.
    pub fn try_inverse(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.rows(),
                found: self.cols(),
            });
        }
        self.0
            .clone()
            .try_inverse()
            .map(Self)
            .ok_or_else(|| Error::NumericalFailure("matrix is singular".into()))
    }

    /// Applies a real function to the spectrum of a Hermitian matrix.
    pub fn hermitian_map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let eig = hermitian_eig(self)?;
        Ok(eig.reconstruct_with(f))
    }

    /// Inverse of a Hermitian positive-definite matrix via its eigensystem.
    pub fn hermitian_inverse(&self) -> Result<Self> {
        let eig = hermitian_eig(self)?;
        let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if let Some(&min) = eig.eigenvalues.last() {
            if min <= PSD_TOL * scale.max(1.0) {
                return Err(Error::NumericalFailure(format!(
                    "matrix is not positive definite (min eigenvalue {min:.3e})"
                )));
            }
        }
        Ok(eig.reconstruct_with(|x| 1.0 / x))
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows() != other.rows() {
            return Err(Error::DimensionMismatch {
                expected: self.rows(),
                found: other.rows(),
            });
        }
        if self.cols() != other.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.cols(),
                found: other.cols(),
            });
        }
        Ok(())
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix{}", self.0)
    }
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols(), rhs.rows(), "matrix product dimension mismatch");
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

/// Eigenvalues (descending) and unitary eigenvectors (columns) of a Hermitian
/// matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianEigenSystem {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEigenSystem {
    /// `V f(Λ) V†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let v = self.eigenvectors.inner();
        let n = v.nrows();
        let mut scaled = v.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let s = f(lambda);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        ComplexMatrix(&scaled * v.adjoint())
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(|x| x)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn eigenvector(&self, k: usize) -> DVector<Complex64> {
        self.eigenvectors.inner().column(k).into_owned()
    }
}

/// Eigendecomposition of a Hermitian matrix with deterministic ordering and
/// phase convention.
pub fn hermitian_eig(a: &ComplexMatrix) -> Result<HermitianEigenSystem> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: a.cols(),
        });
    }
    let norm = a.frobenius_norm();
    let defect = a.hermitian_defect();
    if defect > HERMITIAN_TOL * norm {
        return Err(Error::NotHermitian { asymmetry: defect });
    }
    let n = a.rows();
    let sym = a.hermitian_part();
    let eig = SymmetricEigen::try_new(sym.0, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NumericalFailure("eigen-iteration did not converge".into()))?;

    let mut pairs: Vec<(f64, Vec<Complex64>)> = (0..n)
        .map(|j| {
            let mut col: Vec<Complex64> = eig.eigenvectors.column(j).iter().copied().collect();
            fix_phase(&mut col);
            (eig.eigenvalues[j], col)
        })
        .collect();

    let scale = pairs
        .iter()
        .fold(0.0f64, |m, (v, _)| m.max(v.abs()))
        .max(1e-300);
    pairs.sort_by(|(la, va), (lb, vb)| {
        if (la - lb).abs() <= DEGENERACY_TOL * scale {
            lexicographic_desc(va, vb)
        } else {
            lb.partial_cmp(la).unwrap_or(Ordering::Equal)
        }
    });

    let eigenvalues = pairs.iter().map(|(l, _)| *l).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |i, j| pairs[j].1[i]);
    Ok(HermitianEigenSystem {
        eigenvalues,
        eigenvectors: ComplexMatrix(eigenvectors),
    })
}

/// Rotates `v` so its largest-magnitude entry (lowest index on ties) is real
/// and nonnegative.
fn fix_phase(v: &mut [Complex64]) {
    let max = v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-12))
        .expect("max attained");
    let phase = v[pivot].conj() / v[pivot].norm();
    for z in v.iter_mut() {
        *z *= phase;
    }
    v[pivot] = Complex64::new(v[pivot].re, 0.0);
}

fn lexicographic_desc(a: &[Complex64], b: &[Complex64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.re.partial_cmp(&x.re).unwrap_or(Ordering::Equal) {
            Ordering::Equal => {}
            other => return other,
        }
        match y.im.partial_cmp(&x.im).unwrap_or(Ordering::Equal) {
            Ordering::Equal => {}
            other => return other,
        }
    }
    Ordering::Equal
}

/// Principal (Hermitian PSD) square root. Negative eigenvalues within
/// tolerance are clamped to zero.
pub fn principal_sqrt(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(a)?;
    let tol = PSD_TOL * a.frobenius_norm().max(1.0);
    let min = eig.min_eigenvalue();
    if min < -tol {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    Ok(eig.reconstruct_with(|x| x.max(0.0).sqrt()).hermitian_part())
}

/// `A ⪯ B`, i.e. the smallest eigenvalue of `B - A` is at least `-1e-9`.
pub fn psd_leq(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<bool> {
    a.check_same_shape(b)?;
    let diff = (b - a).hermitian_part();
    Ok(hermitian_eig(&diff)?.min_eigenvalue() >= -ORDER_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn identity_eigensystem() {
        let eig = hermitian_eig(&ComplexMatrix::identity(2)).unwrap();
        assert_eq!(eig.eigenvalues, vec![1.0, 1.0]);
        assert_eq!(eig.eigenvectors, ComplexMatrix::identity(2));
    }

    #[test]
    fn diagonal_sorted_descending() {
        let eig = hermitian_eig(&ComplexMatrix::from_real_diagonal(&[0.4, 0.8])).unwrap();
        assert_eq!(eig.eigenvalues, vec![0.8, 0.4]);
        let v = eig.eigenvectors.inner();
        assert_eq!(v[(0, 0)], c(0.0));
        assert_eq!(v[(1, 0)], c(1.0));
        assert_eq!(v[(0, 1)], c(1.0));
    }

    #[test]
    fn two_by_two_matches_characteristic_polynomial() {
        // λ = 0.6 ± sqrt(0.04 + 0.04)
        let a = ComplexMatrix::from_real_rows(&[&[0.8, -0.2], &[-0.2, 0.4]]).unwrap();
        let eig = hermitian_eig(&a).unwrap();
        let r = 0.08f64.sqrt();
        assert!((eig.eigenvalues[0] - (0.6 + r)).abs() < 1e-14);
        assert!((eig.eigenvalues[1] - (0.6 - r)).abs() < 1e-14);
        assert!((eig.eigenvalues[0] - 0.883).abs() < 1e-3);
        assert!((eig.eigenvalues[1] - 0.317).abs() < 1e-3);
    }

    #[test]
    fn phase_convention_holds() {
        let a = ComplexMatrix::from_rows(&[
            vec![c(2.0), Complex64::new(0.3, 0.7)],
            vec![Complex64::new(0.3, -0.7), c(1.0)],
        ])
        .unwrap();
        let eig = hermitian_eig(&a).unwrap();
        for k in 0..2 {
            let v = eig.eigenvector(k);
            let (imax, _) = v.iter().enumerate().fold((0, 0.0), |(bi, bm), (i, z)| {
                if z.norm() > bm + 1e-12 {
                    (i, z.norm())
                } else {
                    (bi, bm)
                }
            });
            assert_eq!(v[imax].im, 0.0);
            assert!(v[imax].re >= 0.0);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let a = ComplexMatrix::from_real_rows(&[&[1.0, 0.5], &[0.0, 1.0]]).unwrap();
        assert!(matches!(hermitian_eig(&a), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(ComplexMatrix::from_real_rows(&[&[f64::NAN]]).is_err());
        assert!(ComplexMatrix::from_rows(&[]).is_err());
    }

    #[test]
    fn sqrt_examples() {
        assert_eq!(
            principal_sqrt(&ComplexMatrix::identity(3)).unwrap(),
            ComplexMatrix::identity(3)
        );
        let s = principal_sqrt(&ComplexMatrix::from_real_diagonal(&[0.04, 0.09])).unwrap();
        assert!((s.get(0, 0).re - 0.2).abs() < 1e-15);
        assert!((s.get(1, 1).re - 0.3).abs() < 1e-15);
        assert!(s.get(0, 1).norm() < 1e-15);

        let a = ComplexMatrix::from_real_rows(&[&[0.8, -0.2], &[-0.2, 0.4]]).unwrap();
        let s = principal_sqrt(&a).unwrap();
        assert!((&(&s * &s) - &a).frobenius_norm() < 1e-9 * (1.0 + a.frobenius_norm()));
    }

    #[test]
    fn sqrt_rejects_negative() {
        let a = ComplexMatrix::from_real_diagonal(&[1.0, -0.1]);
        assert!(matches!(principal_sqrt(&a), Err(Error::NotPsd { .. })));
        // within tolerance: clamped
        let a = ComplexMatrix::from_real_diagonal(&[1.0, -1e-14]);
        let s = principal_sqrt(&a).unwrap();
        assert_eq!(s.get(1, 1).re, 0.0);
    }

    #[test]
    fn loewner_order() {
        let i = ComplexMatrix::identity(2);
        let half = i.scale(0.5);
        assert!(psd_leq(&half, &i).unwrap());
        assert!(!psd_leq(&i, &half).unwrap());
        let e0 = ComplexMatrix::from_real_rows(&[&[0.8, -0.2], &[-0.2, 0.4]]).unwrap();
        assert!(psd_leq(&e0, &i).unwrap());
        assert!(matches!(
            psd_leq(&e0, &ComplexMatrix::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn hermitian_inverse_matches_lu() {
        let a = ComplexMatrix::from_real_rows(&[&[0.3, 0.1], &[0.1, 0.9]]).unwrap();
        let diff = &a.hermitian_inverse().unwrap() - &a.try_inverse().unwrap();
        assert!(diff.frobenius_norm() < 1e-12);
    }
}
