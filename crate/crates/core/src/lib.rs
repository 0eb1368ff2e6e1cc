//! Accelerated damped-Newton iterations for two-dimensional nonlinear
//! systems, with SVD-based preconditioning, baseline solvers, benchmark
//! problems and numerical checks of the iteration's error dynamics.

pub mod analysis;
pub mod classic;
pub mod error;
pub mod harness;
pub mod problems;
pub mod smallmat;
pub mod w4;

pub use classic::{solve_broyden_good, solve_damped_newton, solve_newton, BroydenState};
pub use error::{DomainError, SolverError};
pub use harness::{run_case, run_table, HarnessError, RunSpec, SolverKind, TableCell};
pub use problems::{registry, Problem, ProblemId, System, UnknownProblem};
pub use smallmat::{det2, eig2, solve2, svd2, Mat2, SvdResult, ThresholdMode, Vec2, ZeroThreshold};
pub use w4::{
    solve_w4_generic, solve_w4sv, w4_step, Preconditioners, SolveReport, SolveStatus, TraceRow,
    W4Config, W4State,
};
