//! Inverse problems: potentials from DN data and polyhomogeneous
//! nonlinearities from ε-scaled trajectories.

pub mod expansion;
pub mod potential;

pub use expansion::{
    extract_leading_term, fit_homogeneous_coefficient, linearized_solution, nonlinear_residual, recover_expansion,
    ExpansionEstimate, LeadingTerm, LinearizedSolution, RecoveredTerm, SemilinearOracle, SimulatedOracle,
};
pub use potential::{bump_profiles, recover_potential, PotentialRecovery, PotentialRecoveryOptions};
