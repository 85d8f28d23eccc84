//! Numerical solution of the constrained problems over Eve's state and of
//! their unconstrained relaxations.
//!
//! Each start draws a random rank-r state and runs BFGS on an augmented
//! Lagrangian of the ratio constraints. Starts run in parallel; the best
//! feasible start wins, ties going to the lowest start index.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis::{SYMMETRY_GROUP, XMM, XMP, XPM, XPP};
use super::bfgs;
use super::form::Form;
use super::stats::{evaluate_statistics, EveState, RateStatistics, StatisticForms};
use crate::detector::DetectorPair;
use crate::error::{Error, Result};
use crate::filter::VirtualFilterC;
use crate::random;

/// Residual above which a solve is reported infeasible rather than stalled.
pub const INFEASIBLE_RESIDUAL: f64 = 1e-4;
/// Amplitude of the error components in witnesses of the phase-error ratio.
const ERROR_AMPLITUDE: f64 = 1e-4;
const MAX_OUTER: usize = 40;
const MAX_PENALTY: f64 = 1e12;
const INNER_RESIDUAL_TARGET: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub starts: usize,
    pub rank: usize,
    /// Also try ranks 1, 2 and 4d and keep the best.
    pub scan_ranks: bool,
    pub seed: u64,
    /// BFGS iterations per inner solve.
    pub max_iters: usize,
    pub penalty_init: f64,
    pub constraint_tol: f64,
    /// Restrict Eve to states invariant under bit and basis flips.
    pub symmetric: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            starts: 64,
            rank: 1,
            scan_ranks: false,
            seed: 0,
            max_iters: 400,
            penalty_init: 10.0,
            constraint_tol: 1e-5,
            symmetric: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub value: f64,
    pub witness: EveState,
    pub statistics: RateStatistics,
    pub residual: f64,
}

struct Ratio {
    num: Form,
    den: Form,
}

enum Objective {
    /// `sign · N/B`.
    Linear { ratio: Ratio, sign: f64 },
    /// `sign · Σ p_i log(N_i/B_i)`.
    Log {
        factors: Vec<(Ratio, f64)>,
        sign: f64,
    },
}

struct Problem {
    objective: Objective,
    constraints: Vec<(Ratio, f64)>,
    d: usize,
    /// `φ = (T ⊗ I) ψ` maps optimizer coordinates to the standard basis.
    transform: Option<[[f64; 4]; 4]>,
}

fn vectors_of(x: &[f64], d: usize) -> Vec<Vec<Complex64>> {
    x.chunks(8 * d)
        .map(|c| c.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect())
        .collect()
}

fn total(form: &Form, phis: &[Vec<Complex64>]) -> f64 {
    phis.iter().map(|p| form.value(p)).sum()
}

fn accumulate(form: &Form, phis: &[Vec<Complex64>], scale: f64, grad: &mut [f64], d: usize) {
    for (phi, g) in phis.iter().zip(grad.chunks_mut(8 * d)) {
        form.accumulate_gradient(phi, scale, g);
    }
}

impl Problem {
    fn ratio_values(&self, phis: &[Vec<Complex64>], ratio: &Ratio) -> (f64, f64) {
        (total(&ratio.num, phis), total(&ratio.den, phis))
    }

    fn objective_value(&self, phis: &[Vec<Complex64>]) -> f64 {
        match &self.objective {
            Objective::Linear { ratio, sign } => {
                let (n, b) = self.ratio_values(phis, ratio);
                sign * n / b
            }
            Objective::Log { factors, sign } => {
                sign * factors
                    .iter()
                    .map(|(r, p)| {
                        let (n, b) = self.ratio_values(phis, r);
                        p * (n / b).ln()
                    })
                    .sum::<f64>()
            }
        }
    }

    fn residuals(&self, phis: &[Vec<Complex64>]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|(r, target)| {
                let (n, b) = self.ratio_values(phis, r);
                n / b - target
            })
            .collect()
    }

    /// Augmented Lagrangian `f + Σ λ_i c_i + (μ/2) Σ c_i²` plus a term pinning
    /// the overall scale, which no ratio depends on.
    fn lagrangian(&self, x: &[f64], grad: &mut [f64], lambda: &[f64], mu: f64) -> f64 {
        let d = self.d;
        let phis = vectors_of(x, d);
        grad.fill(0.0);
        let mut value = 0.0;
        match &self.objective {
            Objective::Linear { ratio, sign } => {
                let (n, b) = self.ratio_values(&phis, ratio);
                value += sign * n / b;
                accumulate(&ratio.num, &phis, sign / b, grad, d);
                accumulate(&ratio.den, &phis, -sign * n / (b * b), grad, d);
            }
            Objective::Log { factors, sign } => {
                for (r, p) in factors {
                    let (n, b) = self.ratio_values(&phis, r);
                    value += sign * p * (n / b).ln();
                    accumulate(&r.num, &phis, sign * p / n, grad, d);
                    accumulate(&r.den, &phis, -sign * p / b, grad, d);
                }
            }
        }
        for ((r, target), l) in self.constraints.iter().zip(lambda) {
            let (n, b) = self.ratio_values(&phis, r);
            let c = n / b - target;
            value += l * c + 0.5 * mu * c * c;
            let w = l + mu * c;
            accumulate(&r.num, &phis, w / b, grad, d);
            accumulate(&r.den, &phis, -w * n / (b * b), grad, d);
        }
        let norm_sq: f64 = x.iter().map(|v| v * v).sum();
        value += (norm_sq - 1.0).powi(2);
        for (g, v) in grad.iter_mut().zip(x) {
            *g += 4.0 * (norm_sq - 1.0) * v;
        }
        value
    }

    fn witness(&self, x: &[f64], symmetric: bool) -> Result<EveState> {
        let d = self.d;
        let mut vectors = Vec::new();
        for psi in vectors_of(x, d) {
            let phi: Vec<Complex64> = match &self.transform {
                None => psi,
                Some(t) => (0..4 * d)
                    .map(|i| {
                        let (a, s) = (i / d, i % d);
                        (0..4).map(|b| psi[b * d + s] * t[a][b]).sum()
                    })
                    .collect(),
            };
            if symmetric {
                let scale = 1.0 / (SYMMETRY_GROUP.len() as f64).sqrt();
                for sign in SYMMETRY_GROUP {
                    vectors.push(DVector::from_fn(4 * d, |i, _| {
                        phi[i] * (sign[i / d] * scale)
                    }));
                }
            } else {
                vectors.push(DVector::from_vec(phi));
            }
        }
        EveState::new(vectors)
    }
}

struct StartResult {
    x: Vec<f64>,
    value: f64,
    residual: f64,
}

fn normalize(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
}

fn run_start(problem: &Problem, config: &SolverConfig, rank: usize, index: usize) -> StartResult {
    let d = problem.d;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(((rank as u64) << 32) | index as u64);
    let mut x: Vec<f64> = (0..rank)
        .flat_map(|_| {
            random::unit_vector(&mut rng, 4 * d)
                .iter()
                .flat_map(|z| [z.re, z.im])
                .collect::<Vec<_>>()
        })
        .collect();
    normalize(&mut x);

    let gtol = 1e-12;
    if problem.constraints.is_empty() {
        let m = bfgs::minimize(
            |x, g| problem.lagrangian(x, g, &[], 0.0),
            x,
            config.max_iters,
            gtol,
        );
        let phis = vectors_of(&m.x, d);
        return StartResult {
            value: problem.objective_value(&phis),
            x: m.x,
            residual: 0.0,
        };
    }

    let mut lambda = vec![0.0; problem.constraints.len()];
    let mut mu = config.penalty_init;
    let mut previous = f64::INFINITY;
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_OUTER {
        normalize(&mut x);
        let m = bfgs::minimize(
            |x, g| problem.lagrangian(x, g, &lambda, mu),
            x,
            config.max_iters,
            gtol,
        );
        x = m.x;
        let c = problem.residuals(&vectors_of(&x, d));
        residual = c.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if !residual.is_finite() {
            break;
        }
        if residual <= INNER_RESIDUAL_TARGET {
            break;
        }
        for (l, ci) in lambda.iter_mut().zip(&c) {
            *l += mu * ci;
        }
        if residual > 0.25 * previous {
            mu = (mu * 10.0).min(MAX_PENALTY);
        }
        previous = residual;
    }
    normalize(&mut x);
    let phis = vectors_of(&x, d);
    StartResult {
        value: problem.objective_value(&phis),
        x,
        residual,
    }
}

fn ranks_for(config: &SolverConfig, d: usize) -> Vec<usize> {
    let mut ranks = vec![config.rank.max(1)];
    if config.scan_ranks {
        ranks.extend([1, 2, 4 * d]);
    }
    ranks.sort_unstable();
    ranks.dedup();
    ranks
}

/// Runs all starts over all requested ranks and returns the best feasible
/// point as `(objective, x, residual, rank)`.
fn solve(problem: &Problem, config: &SolverConfig) -> Result<(Vec<f64>, f64)> {
    if config.starts == 0 {
        return Err(Error::DomainError {
            name: "starts",
            value: 0.0,
        });
    }
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut best_residual = f64::INFINITY;
    for rank in ranks_for(config, problem.d) {
        let results: Vec<StartResult> = (0..config.starts)
            .into_par_iter()
            .map(|i| run_start(problem, config, rank, i))
            .collect();
        for r in results {
            if r.residual.is_finite() {
                best_residual = best_residual.min(r.residual);
            }
            let feasible = r.residual <= config.constraint_tol && r.value.is_finite();
            if feasible && best.as_ref().is_none_or(|(v, _, _)| r.value < *v) {
                best = Some((r.value, r.x, r.residual));
            }
        }
    }
    match best {
        Some((_, x, residual)) => Ok((x, residual)),
        None if best_residual < INFEASIBLE_RESIDUAL => {
            Err(Error::SolverBudgetExceeded { best_residual })
        }
        None => Err(Error::Infeasible { best_residual }),
    }
}

fn check_rate(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&value) {
        return Err(Error::DomainError { name, value });
    }
    Ok(())
}

fn forms_for(pair: &DetectorPair, filter: &VirtualFilterC, symmetric: bool) -> StatisticForms {
    let forms = StatisticForms::new(pair, filter);
    if symmetric {
        forms.map(|f| f.symmetrized(&SYMMETRY_GROUP))
    } else {
        forms
    }
}

fn constrained(
    pair: &DetectorPair,
    filter: &VirtualFilterC,
    observed_eb: f64,
    observed_epp: f64,
    config: &SolverConfig,
    p1: bool,
) -> Result<Solution> {
    pair.require_full_rank()?;
    check_rate("observed_eb", observed_eb)?;
    check_rate("observed_epp", observed_epp)?;
    let f = forms_for(pair, filter, config.symmetric);
    let objective = if p1 {
        Objective::Linear {
            ratio: Ratio {
                num: f.ep_den.clone(),
                den: f.z_den.clone(),
            },
            sign: 1.0,
        }
    } else {
        Objective::Linear {
            ratio: Ratio {
                num: f.ep_num.clone(),
                den: f.ep_den.clone(),
            },
            sign: -1.0,
        }
    };
    let problem = Problem {
        objective,
        constraints: vec![
            (
                Ratio {
                    num: f.eb_num,
                    den: f.z_den,
                },
                observed_eb,
            ),
            (
                Ratio {
                    num: f.epp_num,
                    den: f.x_den,
                },
                observed_epp,
            ),
        ],
        d: pair.dim(),
        transform: None,
    };
    let (x, residual) = solve(&problem, config)?;
    let witness = problem.witness(&x, config.symmetric)?;
    let statistics = evaluate_statistics(&witness, pair, filter)?;
    Ok(Solution {
        value: if p1 {
            statistics.p_succ
        } else {
            statistics.e_p
        },
        witness,
        statistics,
        residual,
    })
}

/// Smallest filtering probability compatible with the observed bit and phase
/// error rates.
pub fn solve_p1(
    pair: &DetectorPair,
    filter: &VirtualFilterC,
    observed_eb: f64,
    observed_epp: f64,
    config: &SolverConfig,
) -> Result<Solution> {
    constrained(pair, filter, observed_eb, observed_epp, config, true)
}

/// Largest virtual phase error rate compatible with the observed bit and
/// phase error rates.
pub fn solve_p2(
    pair: &DetectorPair,
    filter: &VirtualFilterC,
    observed_eb: f64,
    observed_epp: f64,
    config: &SolverConfig,
) -> Result<Solution> {
    constrained(pair, filter, observed_eb, observed_epp, config, false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedBounds {
    pub p_succ_min: f64,
    pub ep_ratio_max: f64,
    pub p_succ_witness: EveState,
    pub ep_ratio_witness: EveState,
}

/// Minimum filtering probability and maximum ratio `e_p / e_p′` over all
/// states, found numerically.
///
/// The ratio is largest when the phase-error components vanish, so its
/// search runs in the X̃ eigenbasis with those components scaled down to a
/// fixed small amplitude.
pub fn solve_unconstrained_bounds_numeric(
    pair: &DetectorPair,
    filter: &VirtualFilterC,
    config: &SolverConfig,
) -> Result<UnconstrainedBounds> {
    pair.require_full_rank()?;
    let d = pair.dim();
    let f = forms_for(pair, filter, config.symmetric);

    let p1 = Problem {
        objective: Objective::Log {
            factors: vec![(
                Ratio {
                    num: f.ep_den.clone(),
                    den: f.z_den.clone(),
                },
                1.0,
            )],
            sign: 1.0,
        },
        constraints: Vec::new(),
        d,
        transform: None,
    };
    let (x1, _) = solve(&p1, config)?;
    let p_succ_witness = p1.witness(&x1, config.symmetric)?;
    let p_succ_min = evaluate_statistics(&p_succ_witness, pair, filter)?.p_succ;

    let s = std::f64::consts::FRAC_1_SQRT_2;
    let scales = [1.0, ERROR_AMPLITUDE, ERROR_AMPLITUDE, 1.0];
    let mut t = [[0.0; 4]; 4];
    for (j, axis) in [XPP, XMP, XPM, XMM].iter().enumerate() {
        for a in 0..4 {
            t[a][j] = axis[a] * s * scales[j];
        }
    }
    let pull = |form: &Form| form.pulled_back(&t);
    let p2 = Problem {
        objective: Objective::Log {
            factors: vec![
                (
                    Ratio {
                        num: pull(&f.ep_num),
                        den: pull(&f.ep_den),
                    },
                    1.0,
                ),
                (
                    Ratio {
                        num: pull(&f.epp_num),
                        den: pull(&f.x_den),
                    },
                    -1.0,
                ),
            ],
            sign: -1.0,
        },
        constraints: Vec::new(),
        d,
        transform: Some(t),
    };
    let (x2, _) = solve(&p2, config)?;
    let ep_ratio_witness = p2.witness(&x2, config.symmetric)?;
    let stats = evaluate_statistics(&ep_ratio_witness, pair, filter)?;
    if !(stats.e_p_prime > 0.0) {
        return Err(Error::ZeroDenominator {
            quantity: "e_p / e_p_prime",
        });
    }
    Ok(UnconstrainedBounds {
        p_succ_min,
        ep_ratio_max: stats.e_p / stats.e_p_prime,
        p_succ_witness,
        ep_ratio_witness,
    })
}
