//! Strictly feasible log-barrier solver for smooth inequality-constrained
//! maximization.

mod problem;
mod solver;

pub use problem::{fd_step, FnProblem, NlpProblem};
pub use solver::{
    check_gradient, find_interior_point, is_strictly_interior, solve, strictly_inside_box,
    BarrierStage, NlpSolution, SolveStatus, SolverOptions,
};
