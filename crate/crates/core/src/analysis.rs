//! Whole-pair summaries and error-rate sweeps with `e_b = e_p′ = e`.

use rayon::prelude::*;
use serde::Serialize;

use crate::detector::{mismatch_spectrum, DetectorPair};
use crate::error::{Error, Result};
use crate::eve::{solve_p1, solve_p2, suboptimal_bounds, SolverConfig};
use crate::filter::{compute_c, special_case_rate, Knowledge, ZeroReason};
use crate::keyrate::{four_phase_rate, noisy_rate_with, RateMethod};

/// Slack allowed when checking row orderings.
pub const ROW_SLACK: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairAnalysis {
    pub d: usize,
    pub full_rank: [bool; 2],
    /// Empty when the rate is provably zero.
    pub spectrum: Vec<f64>,
    pub noiseless_rate: f64,
    pub zero_reason: Option<ZeroReason>,
    pub p_succ_lower: Option<f64>,
    pub ep_ratio_upper: Option<f64>,
    pub validity_margin: Option<f64>,
}

pub fn analyze_pair(pair: &DetectorPair, knowledge: Knowledge) -> Result<PairAnalysis> {
    let special = special_case_rate(pair, knowledge)?;
    let mut out = PairAnalysis {
        d: pair.dim(),
        full_rank: [pair.is_full_rank(0), pair.is_full_rank(1)],
        spectrum: Vec::new(),
        noiseless_rate: special.rate,
        zero_reason: special.zero_reason,
        p_succ_lower: None,
        ep_ratio_upper: None,
        validity_margin: None,
    };
    if special.zero_reason.is_none() && pair.both_full_rank() {
        let spectrum = mismatch_spectrum(pair)?;
        let (lower, upper) = suboptimal_bounds(&spectrum);
        out.validity_margin = Some(compute_c(&spectrum, pair)?.validity_margin);
        out.spectrum = spectrum.ratios;
        out.p_succ_lower = Some(lower);
        out.ep_ratio_upper = Some(upper);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub e_max: f64,
    pub steps: usize,
    pub bounds_only: bool,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub e_obs: f64,
    pub p_succ_bound: f64,
    pub p_succ_opt: Option<f64>,
    pub e_p_bound: f64,
    pub e_p_opt: Option<f64>,
    pub rate_bound: f64,
    pub rate_opt: Option<f64>,
    pub rate_4phase: f64,
    pub rate_bound_raw: f64,
    pub rate_opt_raw: Option<f64>,
    pub status: String,
}

impl SweepRow {
    /// Orderings every row must satisfy; empty when all hold.
    pub fn violations(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if let Some(p) = self.p_succ_opt {
            if p < self.p_succ_bound - ROW_SLACK {
                out.push("p_succ_opt < p_succ_bound");
            }
        }
        if let Some(e) = self.e_p_opt {
            if e > self.e_p_bound + ROW_SLACK {
                out.push("e_p_opt > e_p_bound");
            }
        }
        if let Some(r) = self.rate_opt_raw {
            if r < self.rate_bound_raw - ROW_SLACK {
                out.push("rate_opt < rate_bound");
            }
        }
        out
    }
}

pub fn run_sweep(pair: &DetectorPair, config: &SweepConfig) -> Result<Vec<SweepRow>> {
    if !(0.0..=0.25).contains(&config.e_max) {
        return Err(Error::DomainError {
            name: "e_max",
            value: config.e_max,
        });
    }
    if config.steps < 2 {
        return Err(Error::DomainError {
            name: "steps",
            value: config.steps as f64,
        });
    }
    pair.require_full_rank()?;
    let spectrum = mismatch_spectrum(pair)?;
    let filter = compute_c(&spectrum, pair)?;
    let (lower, upper) = suboptimal_bounds(&spectrum);

    let grid: Vec<f64> = (0..config.steps)
        .map(|i| config.e_max * i as f64 / (config.steps - 1) as f64)
        .collect();
    grid.into_par_iter()
        .map(|e| {
            let e_p_bound = e * upper;
            let bound = noisy_rate_with(lower, e_p_bound.min(1.0), e, RateMethod::NoisyBounds)?;
            let four = four_phase_rate(e, e)?;
            let mut row = SweepRow {
                e_obs: e,
                p_succ_bound: lower,
                p_succ_opt: None,
                e_p_bound,
                e_p_opt: None,
                rate_bound: bound.rate,
                rate_opt: None,
                rate_4phase: four.rate,
                rate_bound_raw: bound.rate_raw,
                rate_opt_raw: None,
                status: "bounds-only".into(),
            };
            if config.bounds_only {
                return Ok(row);
            }
            let optimized = solve_p1(pair, &filter, e, e, &config.solver).and_then(|p1| {
                let p2 = solve_p2(pair, &filter, e, e, &config.solver)?;
                Ok((p1.value, p2.value))
            });
            match optimized {
                Ok((p, ep)) => {
                    let opt = noisy_rate_with(
                        p.min(1.0),
                        ep.clamp(0.0, 1.0),
                        e,
                        RateMethod::NoisyOptimized,
                    )?;
                    row.p_succ_opt = Some(p);
                    row.e_p_opt = Some(ep);
                    row.rate_opt = Some(opt.rate);
                    row.rate_opt_raw = Some(opt.rate_raw);
                    let violations = row.violations();
                    row.status = if violations.is_empty() {
                        "ok".into()
                    } else {
                        violations.join("; ")
                    };
                }
                Err(err) => row.status = err.to_string(),
            }
            Ok(row)
        })
        .collect()
}
