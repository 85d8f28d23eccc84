//! Eve's collective attack: the state `ρ_E`, the statistics it induces, the
//! analytic bounds over all states and the numerical constrained problems.

pub mod basis;
mod bfgs;
mod form;
pub mod solver;
pub mod stats;

pub use basis::BasisConstants;
pub use solver::{
    solve_p1, solve_p2, solve_unconstrained_bounds_numeric, Solution, SolverConfig,
    UnconstrainedBounds, INFEASIBLE_RESIDUAL,
};
pub use stats::{evaluate_statistics, mediant_check, suboptimal_bounds, EveState, RateStatistics};
