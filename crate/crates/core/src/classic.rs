//! Baseline solvers: Newton-Raphson, damped Newton-Raphson and the "good"
//! Broyden quasi-Newton method. They share the termination rule and trace
//! format of the W4 drivers so their reports are directly comparable.

use crate::error::SolverError;
use crate::problems::System;
use crate::smallmat::{solve2, Mat2, Vec2};
use crate::w4::{drive, SolveReport, W4Config};

/// Newton-Raphson: `x' = x − J(x)⁻¹F(x)`. `cfg.dtau` is ignored.
pub fn solve_newton<S: System + ?Sized>(system: &S, x0: Vec2, cfg: &W4Config) -> SolveReport {
    newton_with_step(system, x0, cfg, 1.0)
}

/// Damped Newton-Raphson: `x' = x − Δτ·J(x)⁻¹F(x)`.
pub fn solve_damped_newton<S: System + ?Sized>(
    system: &S,
    x0: Vec2,
    cfg: &W4Config,
) -> SolveReport {
    newton_with_step(system, x0, cfg, cfg.dtau)
}

fn newton_with_step<S: System + ?Sized>(
    system: &S,
    x0: Vec2,
    cfg: &W4Config,
    scale: f64,
) -> SolveReport {
    drive(system, x0, cfg, |_, x, eval| {
        let dx = solve2(&eval.j, eval.f)?;
        Ok(x - dx * scale)
    })
}

/// Iterate and Jacobian approximation of the Broyden method.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BroydenState {
    pub x: Vec2,
    pub b: Mat2,
}

impl BroydenState {
    /// Seeds the approximation with the analytic Jacobian at `x0`.
    pub fn new<S: System + ?Sized>(system: &S, x0: Vec2) -> Result<Self, SolverError> {
        Ok(BroydenState {
            x: x0,
            b: system.jacobian(x0)?,
        })
    }

    /// Takes the damped quasi-Newton step from `self.x`, where `f = F(self.x)`,
    /// and applies the rank-one secant update.
    pub fn step<S: System + ?Sized>(
        &mut self,
        system: &S,
        f: Vec2,
        dtau: f64,
    ) -> Result<(), SolverError> {
        let delta = solve2(&self.b, f)? * -dtau;
        let next = self.x + delta;
        let df = system.residual(next)? - f;
        self.b = broyden_update(&self.b, delta, df);
        self.x = next;
        Ok(())
    }
}

/// `B' = B + (ΔF − B·δ)·δᵀ / (δᵀδ)`. Leaves `B` unchanged for a zero step.
pub fn broyden_update(b: &Mat2, delta: Vec2, df: Vec2) -> Mat2 {
    let dd = delta.norm_sq();
    if dd == 0.0 {
        return *b;
    }
    *b + Mat2::outer(df - *b * delta, delta) * (1.0 / dd)
}

/// Good Broyden with damped steps `δ = −Δτ·B⁻¹F(x)` and `B₀ = J(x0)`.
pub fn solve_broyden_good<S: System + ?Sized>(system: &S, x0: Vec2, cfg: &W4Config) -> SolveReport {
    let mut state: Option<BroydenState> = None;
    drive(system, x0, cfg, |_, x, eval| {
        let st = state.get_or_insert(BroydenState { x, b: eval.j });
        st.step(system, eval.f, cfg.dtau)?;
        Ok(st.x)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::DomainError;
    use crate::problems::{registry, ProblemId};
    use crate::w4::SolveStatus;

    /// `F(x) = A(x − c)`.
    struct Affine {
        a: Mat2,
        c: Vec2,
    }

    impl System for Affine {
        fn name(&self) -> &'static str {
            "affine"
        }
        fn residual(&self, x: Vec2) -> Result<Vec2, DomainError> {
            Ok(self.a * (x - self.c))
        }
        fn jacobian(&self, _: Vec2) -> Result<Mat2, DomainError> {
            Ok(self.a)
        }
        fn term_norms(&self, x: Vec2) -> Result<Vec2, DomainError> {
            let a = self.a;
            let (x, c) = (x, self.c);
            Ok(Vec2::new(
                (a.a00 * x.e0).abs() + (a.a01 * x.e1).abs() + (a.a00 * c.e0 + a.a01 * c.e1).abs(),
                (a.a10 * x.e0).abs() + (a.a11 * x.e1).abs() + (a.a10 * c.e0 + a.a11 * c.e1).abs(),
            ))
        }
    }

    #[test]
    fn newton_solves_affine_in_one_step() {
        let sys = Affine {
            a: Mat2::new(2.0, 1.0, -1.0, 3.0),
            c: Vec2::new(0.5, -2.0),
        };
        let r = solve_newton(&sys, Vec2::new(10.0, 10.0), &W4Config::default());
        assert_eq!(r.status, SolveStatus::Converged);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn broyden_keeps_exact_model() {
        let sys = Affine {
            a: Mat2::new(2.0, 1.0, -1.0, 3.0),
            c: Vec2::new(0.5, -2.0),
        };
        let mut st = BroydenState::new(&sys, Vec2::new(3.0, 1.0)).unwrap();
        for _ in 0..20 {
            let f = sys.residual(st.x).unwrap();
            st.step(&sys, f, 0.5).unwrap();
            assert!((st.b - sys.a).max_abs() <= 1e-12);
        }
        assert!((st.x - sys.c).norm() < 1e-5);
        let r = solve_broyden_good(&sys, Vec2::new(3.0, 1.0), &W4Config::default());
        assert_eq!(r.status, SolveStatus::Converged);
    }

    #[test]
    fn broyden_update_satisfies_secant_equation() {
        let b = Mat2::new(1.0, 2.0, -0.5, 4.0);
        let delta = Vec2::new(0.3, -0.7);
        let df = Vec2::new(2.0, 1.0);
        let b1 = broyden_update(&b, delta, df);
        assert!((b1 * delta - df).norm() <= 1e-12);
        assert_eq!(broyden_update(&b, Vec2::ZERO, df), b);
    }

    #[test]
    fn singular_starts_abort_at_step_zero() {
        let cfg = W4Config::default();
        for (id, x0) in [
            (ProblemId::Powell, Vec2::new(1.0, 1.0)),
            (ProblemId::Beale, Vec2::new(1.0, 1.0)),
            (ProblemId::Beale, Vec2::new(0.0, 2.0)),
            (ProblemId::Fujisawa, Vec2::new(0.0, 1.0)),
            (ProblemId::Fujisawa, Vec2::new(0.0, -1.0)),
        ] {
            let p = registry(id);
            for r in [
                solve_newton(p, x0, &cfg),
                solve_damped_newton(p, x0, &cfg),
                solve_broyden_good(p, x0, &cfg),
            ] {
                assert_eq!(r.status, SolveStatus::SingularAbort, "{id} {x0}");
                assert_eq!(r.iterations, 0);
                assert_eq!(r.trace.len(), 1);
            }
        }
    }

    #[test]
    fn powell_newton_counts() {
        let p = registry(ProblemId::Powell);
        let x0 = Vec2::new(0.0, 1.0);
        let r = solve_newton(p, x0, &W4Config::default());
        assert_eq!((r.status, r.iterations), (SolveStatus::Converged, 12));
        let r = solve_damped_newton(p, x0, &W4Config::with_dtau(0.5));
        assert_eq!(r.status, SolveStatus::Converged);
        assert!((r.iterations as i64 - 36).abs() <= 2, "{}", r.iterations);
    }
}
