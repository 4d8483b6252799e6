//! Diffusion equations with measure-valued memory kernels.
//!
//! The crate discretizes `∂ₜu + A₀u + ∫_(0,t] A₁u(t-s) dμ(s) = f` on an
//! interval with P1 finite elements and implicit Euler, and provides the
//! checks and convergence studies built on top of the solvers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convolution;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod internal_variables;
pub mod kernel;
pub mod linalg;
pub mod mesh_fem;
pub mod quadrature;
pub mod stepper;
pub mod trajectory;

pub use convolution::{apply_memory, build_weights, convolve_direct, QuadratureWeights, TimeGrid};
pub use diagnostics::{CheckMode, EnergyReport, PositiveTypeReport};
pub use error::{Error, Result};
pub use experiments::{run_scenario, Outcome, ScenarioConfig, SweepResult};
pub use internal_variables::{DiffusiveState, EnergySplit};
pub use kernel::{AcDensity, Atom, BernsteinQuadrature, MeasureKernel};
pub use mesh_fem::{assemble, build_mesh, CoefficientField, FemMatrices, FormConstants, Mesh1D};
pub use stepper::{solve, solve_picard, Forcing, History, ProblemSpec, SolveReport};
pub use trajectory::Trajectory;
