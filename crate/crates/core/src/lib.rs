//! Crank-Nicolson time stepping for the 1-D heat equation where each implicit
//! solve is carried out by a Robbins-Monro stochastic iteration, plus the
//! numerical machinery used to check its convergence behaviour.
//!
//! - [`tridiag`]: tridiagonal matrices, Thomas solve, symmetric spectra
//! - [`cn`]: problem, grid and the `A u[m+1] = B u[m] + w[m] - r[m+1]` system
//! - [`rm`]: the stochastic iteration and its bounded noise
//! - [`analysis`]: error expansion, product bounds, tail bounds, ensemble studies
//! - [`stepper`]: the time march and refinement studies
//! - [`report`]: CSV export

pub mod analysis;
pub mod cn;
pub mod error;
pub mod report;
pub mod rm;
pub mod stepper;
pub mod tridiag;

pub use analysis::{
    aco_study, certify_bounds, error_recursion_check, fit_lemma1, hoeffding_bound, lemma2_sum,
    product_norm, rate_fit, BoundParams, BoundsCertificate, Lemma1Fit, ProductTable, StudyReport,
};
pub use cn::{assemble_cn, CnSystem, Grid, HeatProblem};
pub use error::{Error, Result};
pub use rm::{noise_stream, rm_solve, rm_step, NoiseKind, NoiseModel, RmConfig, RmTrace};
pub use stepper::{analytic_solution, order_study, solve_heat, Field, RmStepConfig, SolverKind};
pub use tridiag::{Spectrum, TriDiag};
