//! Hermitian forms `Tr[ρ Σ_k P(v_k) ⊗ M_k]` on `ℂ⁴ ⊗ ℂᵈ`, evaluated on rank-r
//! states `ρ = Σ_j |φ_j⟩⟨φ_j|` without materializing `4d × 4d` matrices.
//!
//! Vector index `a·d + t` holds coordinate `a` of the 4-dimensional factor and
//! `t` of the auxiliary mode.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub(crate) struct QuadraticTerm {
    pub axis: [f64; 4],
    pub weight: DMatrix<Complex64>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Form {
    pub terms: Vec<QuadraticTerm>,
    pub dim: usize,
}

impl Form {
    pub fn new(dim: usize) -> Self {
        Self {
            terms: Vec::new(),
            dim,
        }
    }

    /// Adds `(P(axis)/2) ⊗ weight`.
    pub fn add_half_projector(mut self, axis: [f64; 4], weight: &DMatrix<Complex64>) -> Self {
        self.terms.push(QuadraticTerm {
            axis,
            weight: weight * Complex64::new(0.5, 0.0),
        });
        self
    }

    /// Adds `I₄ ⊗ weight`.
    pub fn add_identity(mut self, weight: &DMatrix<Complex64>) -> Self {
        for a in 0..4 {
            let mut axis = [0.0; 4];
            axis[a] = 1.0;
            self.terms.push(QuadraticTerm {
                axis,
                weight: weight.clone(),
            });
        }
        self
    }

    fn project(&self, axis: &[f64; 4], phi: &[Complex64]) -> DVector<Complex64> {
        let d = self.dim;
        DVector::from_fn(d, |t, _| {
            (0..4).map(|a| phi[a * d + t] * axis[a]).sum::<Complex64>()
        })
    }

    pub fn value(&self, phi: &[Complex64]) -> f64 {
        self.terms
            .iter()
            .map(|term| {
                let w = self.project(&term.axis, phi);
                w.dotc(&(&term.weight * &w)).re
            })
            .sum()
    }

    /// Adds `scale · ∇value` to `grad`, laid out as `(Re φ_i, Im φ_i)` pairs.
    pub fn accumulate_gradient(&self, phi: &[Complex64], scale: f64, grad: &mut [f64]) {
        let d = self.dim;
        for term in &self.terms {
            let w = self.project(&term.axis, phi);
            let mw = &term.weight * &w;
            for a in 0..4 {
                let c = 2.0 * scale * term.axis[a];
                if c == 0.0 {
                    continue;
                }
                for t in 0..d {
                    let i = a * d + t;
                    grad[2 * i] += c * mw[t].re;
                    grad[2 * i + 1] += c * mw[t].im;
                }
            }
        }
    }

    /// The form in coordinates `ψ` with `φ = (T ⊗ I) ψ`.
    pub fn pulled_back(&self, t: &[[f64; 4]; 4]) -> Form {
        let terms = self
            .terms
            .iter()
            .map(|term| {
                let mut axis = [0.0; 4];
                for (b, out) in axis.iter_mut().enumerate() {
                    *out = (0..4).map(|a| t[a][b] * term.axis[a]).sum();
                }
                QuadraticTerm {
                    axis,
                    weight: term.weight.clone(),
                }
            })
            .collect();
        Form {
            terms,
            dim: self.dim,
        }
    }

    /// Average over `ρ ↦ (S ⊗ I) ρ (S ⊗ I)` for the diagonal sign flips `S`.
    pub fn symmetrized(&self, group: &[[f64; 4]]) -> Form {
        let scale = Complex64::new(1.0 / group.len() as f64, 0.0);
        let mut terms = Vec::with_capacity(self.terms.len() * group.len());
        for term in &self.terms {
            for s in group {
                let mut axis = term.axis;
                for a in 0..4 {
                    axis[a] *= s[a];
                }
                terms.push(QuadraticTerm {
                    axis,
                    weight: &term.weight * scale,
                });
            }
        }
        Form {
            terms,
            dim: self.dim,
        }
    }

    /// Dense `4d × 4d` operator, for tests.
    #[cfg(test)]
    pub fn dense(&self) -> DMatrix<Complex64> {
        let d = self.dim;
        let mut out = DMatrix::zeros(4 * d, 4 * d);
        for term in &self.terms {
            for a in 0..4 {
                for b in 0..4 {
                    let c = term.axis[a] * term.axis[b];
                    if c == 0.0 {
                        continue;
                    }
                    for s in 0..d {
                        for t in 0..d {
                            out[(a * d + s, b * d + t)] += term.weight[(s, t)] * c;
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_form(rng: &mut ChaCha8Rng, d: usize) -> Form {
        let m0 = random::efficiency(rng, d, 0.1, 0.9).into_inner();
        let m1 = random::efficiency(rng, d, 0.1, 0.9).into_inner();
        Form::new(d)
            .add_half_projector([0.0, 1.0, 1.0, 0.0], &m0)
            .add_half_projector([1.0, 0.0, 0.0, -1.0], &m1)
            .add_identity(&m0)
    }

    #[test]
    fn value_matches_dense_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let form = sample_form(&mut rng, 3);
        let phi = random::unit_vector(&mut rng, 12);
        let dense = form.dense();
        let expected = phi.dotc(&(&dense * &phi)).re;
        assert!((form.value(phi.as_slice()) - expected).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let form = sample_form(&mut rng, 2);
        let phi = random::unit_vector(&mut rng, 8);
        let mut grad = vec![0.0; 16];
        form.accumulate_gradient(phi.as_slice(), 1.0, &mut grad);
        let h = 1e-6;
        for k in 0..16 {
            let mut plus = phi.clone();
            let mut minus = phi.clone();
            let delta = if k % 2 == 0 {
                Complex64::new(h, 0.0)
            } else {
                Complex64::new(0.0, h)
            };
            plus[k / 2] += delta;
            minus[k / 2] -= delta;
            let fd = (form.value(plus.as_slice()) - form.value(minus.as_slice())) / (2.0 * h);
            assert!(
                (fd - grad[k]).abs() < 1e-6,
                "component {k}: {fd} vs {}",
                grad[k]
            );
        }
    }

    #[test]
    fn pull_back_composes_with_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let form = sample_form(&mut rng, 2);
        let t = [
            [0.5, 0.0, 1.0, 0.0],
            [0.0, 2.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, -1.0],
            [1.0, 0.0, 0.0, 3.0],
        ];
        let psi = random::unit_vector(&mut rng, 8);
        let phi = DVector::from_fn(8, |i, _| {
            let (a, s) = (i / 2, i % 2);
            (0..4).map(|b| psi[b * 2 + s] * t[a][b]).sum::<Complex64>()
        });
        let lhs = form.pulled_back(&t).value(psi.as_slice());
        assert!((lhs - form.value(phi.as_slice())).abs() < 1e-12);
    }
}
