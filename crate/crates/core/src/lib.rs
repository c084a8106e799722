//! Discrete fractional porous medium equation `u_t + L(u^m) = 0` on the
//! interval (-1, 1).
//!
//! Three realizations of the fractional operator `L` are provided (restricted,
//! spectral and censored), together with the stationary profile solver, a
//! positivity-preserving implicit time stepper and a suite of checkers that
//! evaluate boundary and decay estimates on computed trajectories.
//!
//! The crate is `no_std` and only needs `alloc`.
#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod elliptic;
pub mod error;
pub mod estimates;
pub mod evolution;
pub mod grid;
pub mod kernels;
pub mod linalg;
pub mod math;
pub mod operators;
pub mod report;

pub use elliptic::{boundary_exponent_fit, friendly_giant, solve_profile, verify_profile_bounds, ExponentFit, FitWindow, Profile};
pub use error::{Error, Result};
pub use evolution::{
    critical_time, evolve, initial_datum, step_implicit, weighted_norm, DtSchedule, EvolutionConfig, Preset,
    Trajectory,
};
pub use grid::{build_grid, Grid};
pub use kernels::{check_green_bounds, check_kernel_bounds, decompose_kernel, KernelDecomposition};
pub use report::{BoundCheckReport, Verdict};
pub use linalg::{Cholesky, Matrix};
pub use operators::{
    build_cfl, build_dirichlet_laplacian, build_operator, build_rfl, build_sfl, compute_first_eigenpair, compute_green, gamma_of,
    sigma_of, DiscreteOperator, GreenMatrix, OperatorKind, Sigma,
};
