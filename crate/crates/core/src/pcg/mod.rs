//! Instrumented preconditioned conjugate gradients and the convergence bounds
//! it is checked against.

pub mod bounds;
mod solver;

pub use bounds::{
    bound_3lnD, bound_divergence, bound_kaporin, bound_kappa, iter_estimate_divergence,
    iter_estimate_kaporin, iter_estimate_kaporin_recommended, iter_estimate_kappa,
    kaporin_useful, recommended_sigma, three_ln_d_valid, BoundCurves,
};
pub use solver::{pcg_solve, SolveConfig, SolveReport};
