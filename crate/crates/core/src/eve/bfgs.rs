//! Dense BFGS with backtracking line search.

use nalgebra::{DMatrix, DVector};

pub(crate) struct Minimum {
    pub x: Vec<f64>,
}

/// Minimizes `f`, which returns the value and writes the gradient.
pub(crate) fn minimize<F>(mut f: F, x0: Vec<f64>, max_iters: usize, gtol: f64) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = DVector::from_vec(x0);
    let mut g = DVector::zeros(n);
    let mut value = f(x.as_slice(), g.as_mut_slice());
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut trial_g = DVector::zeros(n);
    let max_step = 1.0;

    for _ in 0..max_iters {
        if !value.is_finite() || g.norm() <= gtol * value.abs().max(1.0) {
            break;
        }
        let mut p = -(&h * &g);
        let mut slope = g.dot(&p);
        if !(slope < 0.0) {
            h.fill_with_identity();
            p = -g.clone();
            slope = -g.norm_squared();
        }
        let mut alpha = (max_step / p.norm()).min(1.0);
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + &p * alpha;
            trial_g.fill(0.0);
            let trial_value = f(trial.as_slice(), trial_g.as_mut_slice());
            if trial_value.is_finite() && trial_value <= value + 1e-4 * alpha * slope {
                accepted = Some((trial, trial_value));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, trial_value)) = accepted else {
            break;
        };
        let s = &trial - &x;
        let y = &trial_g - &g;
        let sy = s.dot(&y);
        let decrease = value - trial_value;
        x = trial;
        g.copy_from(&trial_g);
        value = trial_value;
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ, expanded.
            h += (&s * s.transpose()) * (rho * rho * yhy + rho)
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        if decrease.abs() <= 1e-16 * value.abs().max(1e-300) && s.norm() < 1e-14 {
            break;
        }
    }
    Minimum {
        x: x.as_slice().to_vec(),
    }
}
