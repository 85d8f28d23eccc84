//! Time-shift attack: Eve delays each signal to a time slot where one detector
//! is much more efficient than the other, then guesses Bob's bit from the
//! slot alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::detector::DetectorPair;
use crate::error::{Error, Result};
use crate::filter::{special_case_rate, Knowledge, ZeroReason};
use crate::keyrate::binary_entropy;

const BATCH: usize = 8192;

#[derive(Debug, Clone)]
pub struct TimeShiftScenario {
    pub pair: DetectorPair,
    /// `(grid index, probability)` for each time slot Eve uses.
    pub strategy: Vec<(usize, f64)>,
    pub n_signals: usize,
    pub seed: u64,
}

impl TimeShiftScenario {
    pub fn validate(&self) -> Result<()> {
        if self.strategy.is_empty() {
            return Err(Error::InvalidScenario("strategy is empty".into()));
        }
        if self.n_signals == 0 {
            return Err(Error::InvalidScenario("n_signals must be positive".into()));
        }
        let d = self.pair.dim();
        let mut total = 0.0;
        for &(index, p) in &self.strategy {
            if index >= d {
                return Err(Error::InvalidScenario(format!(
                    "index {index} is outside [0, {d})"
                )));
            }
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::InvalidScenario(format!(
                    "probability {p} is negative"
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidScenario(format!(
                "probabilities sum to {total}"
            )));
        }
        for &(index, p) in &self.strategy {
            let (a, b) = self.efficiencies(index);
            if p > 0.0 && a + b <= 0.0 {
                return Err(Error::DegenerateScenario { index });
            }
        }
        Ok(())
    }

    /// `(η₀(t_j), η₁(t_j))`.
    pub fn efficiencies(&self, index: usize) -> (f64, f64) {
        (
            self.pair.efficiency(0).get(index, index).re,
            self.pair.efficiency(1).get(index, index).re,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttackOutcome {
    pub detected_fraction: f64,
    /// Probability that Eve guesses a detected bit correctly.
    pub eve_guess_prob: f64,
    pub empirical_detected_fraction: f64,
    pub empirical_guess_prob: f64,
    /// Binomial standard error of `empirical_guess_prob`.
    pub guess_std_error: f64,
    pub detections: u64,
    /// Rate a mismatch-unaware analysis would claim (noiseless, no privacy
    /// amplification).
    pub naive_rate: f64,
    pub aware_rate: f64,
    pub aware_zero_reason: Option<ZeroReason>,
    /// `1 − H₂(eve_guess_prob)`.
    pub eve_leak_bits: f64,
}

#[derive(Default, Clone, Copy)]
struct Counts {
    detections: u64,
    correct: u64,
}

fn run_batch(
    scenario: &TimeShiftScenario,
    cumulative: &[f64],
    batch: usize,
    size: usize,
) -> Counts {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(batch as u64);
    let mut counts = Counts::default();
    for _ in 0..size {
        let u: f64 = rng.random();
        let slot = cumulative
            .partition_point(|&c| c <= u)
            .min(cumulative.len() - 1);
        let (eta0, eta1) = scenario.efficiencies(scenario.strategy[slot].0);
        let bit = rng.random_bool(0.5);
        let eta = if bit { eta1 } else { eta0 };
        if rng.random::<f64>() < eta {
            counts.detections += 1;
            let guess = eta1 > eta0;
            if guess == bit {
                counts.correct += 1;
            }
        }
    }
    counts
}

pub fn simulate_time_shift(scenario: &TimeShiftScenario) -> Result<AttackOutcome> {
    scenario.validate()?;
    let mut detected = 0.0;
    let mut best = 0.0;
    for &(index, p) in &scenario.strategy {
        let (a, b) = scenario.efficiencies(index);
        detected += p * (a + b);
        best += p * a.max(b);
    }
    let eve_guess_prob = if detected > 0.0 { best / detected } else { 0.5 };
    let detected_fraction = detected / 2.0;

    let mut cumulative: Vec<f64> = scenario
        .strategy
        .iter()
        .scan(0.0, |acc, &(_, p)| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    *cumulative.last_mut().expect("non-empty") = f64::INFINITY;

    let n = scenario.n_signals;
    let counts = (0..n.div_ceil(BATCH))
        .into_par_iter()
        .map(|batch| {
            let size = BATCH.min(n - batch * BATCH);
            run_batch(scenario, &cumulative, batch, size)
        })
        .reduce(Counts::default, |a, b| Counts {
            detections: a.detections + b.detections,
            correct: a.correct + b.correct,
        });
    let empirical_guess_prob = if counts.detections > 0 {
        counts.correct as f64 / counts.detections as f64
    } else {
        0.5
    };
    let guess_std_error = if counts.detections > 0 {
        (eve_guess_prob * (1.0 - eve_guess_prob) / counts.detections as f64).sqrt()
    } else {
        f64::INFINITY
    };

    let aware = special_case_rate(&scenario.pair, Knowledge::FullMatrices)?;
    Ok(AttackOutcome {
        detected_fraction,
        eve_guess_prob,
        empirical_detected_fraction: counts.detections as f64 / n as f64,
        empirical_guess_prob,
        guess_std_error,
        detections: counts.detections,
        naive_rate: 1.0,
        aware_rate: aware.rate,
        aware_zero_reason: aware.zero_reason,
        eve_leak_bits: 1.0 - binary_entropy(eve_guess_prob.clamp(0.0, 1.0))?,
    })
}
