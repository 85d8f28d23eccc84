//! Key rates for BB84 receivers whose two detectors have mismatched,
//! matrix-valued efficiency responses over an auxiliary degree of freedom.

pub mod analysis;
pub mod attack;
pub mod characterization;
pub mod detector;
pub mod error;
pub mod eve;
pub mod filter;
pub mod keyrate;
pub mod matrix;
pub mod random;

pub use analysis::{analyze_pair, run_sweep, PairAnalysis, SweepConfig, SweepRow};
pub use attack::{simulate_time_shift, AttackOutcome, TimeShiftScenario};
pub use characterization::{
    diagonal_only_response, discretize_response, sample_grid, ContinuousResponse, FilteredGate,
};
pub use detector::{
    load_pair, mismatch_spectrum, swap_detectors, DetectorPair, DetectorSpec, EfficiencyResponse,
    MismatchSpectrum,
};
pub use error::{Error, Result};
pub use eve::{
    evaluate_statistics, mediant_check, solve_p1, solve_p2, solve_unconstrained_bounds_numeric,
    suboptimal_bounds, BasisConstants, EveState, RateStatistics, Solution, SolverConfig,
};
pub use filter::{
    compute_c, noiseless_rate, noiseless_rate_bruteforce, special_case_rate, Knowledge,
    NoiselessRate, VirtualFilterC, ZeroReason,
};
pub use keyrate::{
    binary_entropy, four_phase_rate, noisy_rate, noisy_rate_with, scalar_reference_rates,
    KeyRateReport, RateMethod,
};
pub use matrix::{hermitian_eig, principal_sqrt, psd_leq, ComplexMatrix, HermitianEigenSystem};

#[cfg(test)]
pub(crate) mod test_support {
    use crate::detector::{load_pair, DetectorPair};
    use crate::matrix::ComplexMatrix;

    pub fn example2() -> DetectorPair {
        load_pair(
            &ComplexMatrix::from_real_rows(&[&[0.8, -0.2], &[-0.2, 0.4]]).unwrap(),
            &ComplexMatrix::from_real_rows(&[&[0.3, 0.1], &[0.1, 0.9]]).unwrap(),
        )
        .unwrap()
    }
}
