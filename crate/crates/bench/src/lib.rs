//! Fixed inputs shared by the criterion benchmarks.

use w4sv::{ProblemId, Vec2};

/// Well-conditioned, ill-conditioned and rank-one Jacobians.
pub fn sample_jacobians() -> Vec<w4sv::Mat2> {
    vec![
        w4sv::Mat2::new(2.0, 1.0, -1.0, 3.0),
        w4sv::Mat2::new(1e4, 1e4, 1.0, 1.0 + 1e-9),
        w4sv::Mat2::new(10000.0, 10000.0, -1.0, -1.0),
    ]
}

/// Cases timed end to end: Powell from (0,1) and Rosenbrock from (-1.2,1).
pub const SOLVE_CASES: [(ProblemId, Vec2); 2] = [
    (ProblemId::Powell, Vec2 { e0: 0.0, e1: 1.0 }),
    (ProblemId::Rosenbrock, Vec2 { e0: -1.2, e1: 1.0 }),
];
