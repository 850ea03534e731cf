//! Numerical nonlinear potential theory: Wolff, Riesz, Havin–Maz'ya and
//! Green potentials of measures on ℝⁿ, monotone iteration for sublinear
//! integral equations, and executable checks of the inequalities relating
//! them.

pub mod error;
pub mod exponents;
pub mod field;
pub mod geometry;
pub mod kernels;
pub mod measures;
pub mod norms;
pub mod potentials;
pub mod quadrature;
mod serde_f64;
pub mod solver;
pub mod suite;
pub mod verify;

pub use error::{Error, Result};
pub use exponents::{derive_exponents, validate_params, ExponentSet, ProblemParams, TrivialRule};
pub use field::{SampledField, TailModel};
pub use geometry::{BoxGrid, Point};
pub use kernels::{kernel_potential, KernelGridOperator, KernelSpec, KernelVariant};
pub use measures::{restrict_measure, scale_density, AtomicMeasure, BallMass, CellDensityMeasure, Measure};
pub use potentials::{
    havin_mazya_potential, maximal_function, wolff_atomic_exact, wolff_potential, Estimate,
    GridWolffOperator, QuadratureSpec, WolffParams,
};
pub use norms::{
    condition_integral, condition_refinement, lp_norm_dsigma, lp_norm_dx, potential_lp_dx, ConditionKind,
    ConditionOptions, NormReport, Potential,
};
pub use solver::{extend_solution, manufacture_solution, solve_kernel, solve_wolff, Solution, SolveReport, SolverOptions, Target};
pub use suite::{SuiteConfig, CHECKS};
pub use verify::{CheckOptions, CheckReport};
