//! Mean and covariance estimation from projected coefficient data.

pub mod covariance;
pub mod data;
pub mod gradient;
pub mod mean;
pub mod rank;

pub use covariance::{
    accumulate_covariance_rhs, apply_empirical_l, apply_limiting_l, covariance_solvers, solve_covariance, CovarianceEstimate,
    CovarianceOptions, CovarianceProblem, CovarianceSolver, NoiseTerm, SolverReport,
};
pub use data::CoefficientData;
pub use gradient::{gradient_check_covariance, gradient_check_mean};
pub use mean::{accumulate_a_blocks, accumulate_mean, mean_solvers, solve_mean, MeanEstimate, MeanOptions, MeanSolver};
pub use rank::{estimate_rank, fix_eigenvector_phases};
