//! Simulation and steady-state analysis of an electrostatically actuated
//! elastic strip with curvature-exact bending.
//!
//! The deflection `u(t, x)` on `I = (-1, 1)` follows the damping-dominated
//! flow `u_t + K(u) = -lambda g(u)`, where `K` is the quasilinear bending and
//! stretching operator and `g` is the squared potential gradient on the
//! membrane. Two reduced models (small deformation, small gap) are included.

pub mod banded;
pub mod elliptic;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod io;
pub mod operators;
pub mod params;
pub mod problem;
pub mod state;
pub mod steady;

pub use elliptic::{
    electrostatic_energy, solve_potential, trace_rhs, PotentialField, TraceTerm,
};
pub use error::{Error, Result};
pub use evolution::{decay_rate, run, step, OutcomeKind, SimOutcome, StepResult, Trajectory};
pub use grid::{is_even, Grid1D, Grid2D};
pub use operators::{
    apply_h, apply_k, assemble_a, linear_operator, mechanical_energy, spectral_report,
    OperatorMatrix, SpectralReport, MU1,
};
pub use params::{BoundaryCondition, DeviceParams, Model, SolverThresholds};
pub use problem::{total_energy, Problem};
pub use state::{
    bump, discrete_norm, initial_profile, InitialProfile, MembraneState, NodalFunction, NormKind,
};
pub use steady::{
    continue_branch, estimate_pull_in, jacobian, linear_stability, newton_solve, steady_residual,
    BranchPoint, BranchTermination, NewtonReport, BISECTION_STEPS, PullInEstimate, Stability, StabilityReport,
    SteadyBranch,
};
