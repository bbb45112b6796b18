//! A compact LP/MIP kernel.
//!
//! [`solve_lp`] runs a bounded-variable revised simplex and reports primal
//! values, row duals and reduced costs. [`solve_mip`] runs best-bound
//! branch-and-bound over the binary variables of a [`MipProblem`] and hands
//! every integer-feasible candidate to an optional [`LazyCallback`] before
//! accepting it; cuts returned by the callback are added globally.

mod lp;
mod mip;
mod model;
mod simplex;

pub use lp::{solve_lp, LpSolution, LpStatus};
pub use mip::{
    solve_mip, CallbackAction, LazyCallback, MipOptions, MipProblem, MipResult, MipStats, MipStatus, TracePoint,
};
pub use model::{Constraint, LinearProgram, RowSense, Sense, VarId, Variable};

/// Feasibility tolerance used by the simplex.
pub const FEASIBILITY_TOL: f64 = simplex::PRIMAL_TOL;
/// Reduced-cost tolerance used by the simplex.
pub const OPTIMALITY_TOL: f64 = simplex::DUAL_TOL;
/// Distance from an integer below which a binary counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum KernelError {
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("simplex iteration limit reached after {0} iterations")]
    IterationLimit(usize),
    #[error("numerical trouble: {0}")]
    Numerical(String),
    #[error("lazy callback returned a cut not violated by its candidate (violation {violation:e})")]
    CutNotViolated { violation: f64 },
    #[error("lazy callback returned a malformed cut: {0}")]
    MalformedCut(String),
}
