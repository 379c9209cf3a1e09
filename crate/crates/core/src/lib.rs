//! Fractional-calculus operators driven by interchangeable kernels, with a
//! four-entry parameter set selecting how much of the left and right branch
//! each operator takes. On top of the operators: variational problems whose
//! Lagrangians may depend on fractional derivatives and integrals, a direct
//! solver for them, residual diagnostics for the resulting stationarity
//! equations, and conservation-law checks along solutions.

pub mod diff;
pub mod error;
pub mod func;
pub mod kernel;
pub mod lagrangian;
pub mod noether;
pub mod ops;
pub mod oscillator;
pub mod quad;
pub mod ritz;
pub mod special;
pub mod spline;
pub mod util;
pub mod variational;

pub use error::{Error, Result};
pub use func::{DerivSource, FunctionHandle};
pub use kernel::{Admissibility, Kernel, KernelFamily, ParamSet};
pub use lagrangian::{
    flat_index, slot_of, BoundaryMode, BundleArgs, FracOp, IsoperimetricSpec, LagrangianSpec,
    ProblemSpec, Slot,
};
pub use noether::{
    check_invariance, constant_of_motion, d_operator, i_operator, nci_residual, noether_residual,
    random_subintervals, ConservedQuantity, OrderMode, TransformationSpec,
};
pub use ops::{
    a_op, b_op, check_ibp_b, check_ibp_k, default_diff_step, ibp_route, k_op, IbpReport,
};
pub use oscillator::{
    analytic_damped_bvp, build_bck_problem, falva_residual, momentum_law_residual,
    rotation_law_residual, OscillatorConfig, Potential,
};
pub use quad::QuadratureSpec;
pub use ritz::{solve_isoperimetric, solve_ritz, Diagnostics, Solution, SolveOptions};
pub use special::{gamma, recip_gamma};
pub use spline::CubicSpline;
pub use variational::{
    default_residual_grid, el_residual, el_residual_l2, evaluate_constraint, evaluate_functional,
    first_variation_check, natural_bc_residual, validate_problem, FirstVariationReport,
    ValidationReport,
};
