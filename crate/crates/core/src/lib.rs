//! Infinite-thin shock layers on a straight cone at incidence.
//!
//! The layer is described by `f = w_ρ (uᵗ)²` on the azimuth circle, which
//! solves a singular, nonlinear, periodic second-order ODE. [`spectral`]
//! expands `f` in a cosine series and assembles the truncated Galerkin
//! system, [`solver`] runs Newton on it with continuation in the attack
//! angle, and [`postprocess`] recovers `h`, `y`, `uᵗ`, `w`, `w_ρ`, the
//! surface force `W_C` and particle paths. [`validation`] holds the
//! reproducibility studies.

// `!(x > 0.0)` is used on purpose so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod exec;
pub mod model;
pub mod postprocess;
pub mod solver;
pub mod spectral;
pub mod validation;

pub use exec::Execution;
pub use model::{
    chaplygin_min_mach, compute_coefficients, ode_residual_pointwise, pressure_wc, CoefficientForm,
    GasModel, ModelError, OdeCoefficients, ProblemConfig, UpstreamTrace,
};
pub use postprocess::{
    compute_h, integrate_trajectory, integrate_y, recover_fields, FieldProfile, PostprocessError,
    RadialRate, RecoveryOptions, Termination, Trajectory, TrajectoryOptions,
};
pub use solver::{
    continuation_solve, newton_solve, NewtonConfig, NormKind, SolveReport, SolverError,
};
pub use spectral::{
    assemble_f, assemble_jacobian, eval_series, quasi_l1_norm, residual_function, uniform_grid,
    SpectralCoefficients, SpectralError,
};
pub use validation::{assess_validity, StudyOptions, StudyReport, Validity};
