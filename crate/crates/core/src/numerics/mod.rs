//! Dense linear-algebra kernels: pseudoinverse, DARE, and box-constrained QP.

mod dare;
mod pinv;
mod qp;

pub use dare::{
    dare_residual, solve_dare, solve_dare_with, spectral_radius, DareMethod, DareSolution,
    DEFAULT_DARE_MAX_ITER, DEFAULT_DARE_TOL,
};
pub use pinv::{numerical_rank, pseudoinverse, DEFAULT_RANK_TOL};
pub(crate) use pinv::ensure_finite;
pub use qp::{solve_qp, BoxQpSolver, QpProblem, QpSolution, DEFAULT_QP_MAX_ITER, DEFAULT_QP_TOL};
