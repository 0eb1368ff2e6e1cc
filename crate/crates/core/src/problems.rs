//! The two-dimensional benchmark systems.
//!
//! Each problem carries its residual, analytic Jacobian, the per-component
//! "term norm" used by the convergence metric (sum of absolute values of the
//! additive terms once the residual is expanded into monomials), its
//! canonical starting points, and reference roots.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::DomainError;
use crate::smallmat::{Mat2, Vec2};

/// A two-dimensional nonlinear system `F(x) = 0`.
pub trait System: Sync {
    fn name(&self) -> &'static str;

    /// Rejects points where the residual is undefined.
    fn check_domain(&self, _x: Vec2) -> Result<(), DomainError> {
        Ok(())
    }

    fn residual(&self, x: Vec2) -> Result<Vec2, DomainError>;

    fn jacobian(&self, x: Vec2) -> Result<Mat2, DomainError>;

    /// `(‖F_x‖, ‖F_y‖)`: the sum of absolute values of the additive terms of
    /// each residual component.
    fn term_norms(&self, x: Vec2) -> Result<Vec2, DomainError>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProblemId {
    Rosenbrock,
    FreudensteinRoth,
    Powell,
    Brown,
    Beale,
    Hueso,
    Fujisawa,
}

impl ProblemId {
    pub const ALL: [ProblemId; 7] = [
        ProblemId::Rosenbrock,
        ProblemId::FreudensteinRoth,
        ProblemId::Powell,
        ProblemId::Brown,
        ProblemId::Beale,
        ProblemId::Hueso,
        ProblemId::Fujisawa,
    ];

    pub fn name(self) -> &'static str {
        registry(self).name
    }

    /// Table label: problem number plus name.
    pub fn label(self) -> &'static str {
        match self {
            ProblemId::Rosenbrock => "1 (Rosenbrock)",
            ProblemId::FreudensteinRoth => "2 (Freudenstein-Roth)",
            ProblemId::Powell => "3 (Powell)",
            ProblemId::Brown => "4 (Brown)",
            ProblemId::Beale => "5 (Beale)",
            ProblemId::Hueso => "A (Hueso-Monteiro)",
            ProblemId::Fujisawa => "B (Fujisawa)",
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown problem '{0}'")]
pub struct UnknownProblem(pub String);

impl FromStr for ProblemId {
    type Err = UnknownProblem;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "1" | "rosenbrock" | "rosen" => ProblemId::Rosenbrock,
            "2" | "freudensteinroth" | "freudenstein" | "fr" => ProblemId::FreudensteinRoth,
            "3" | "powell" => ProblemId::Powell,
            "4" | "brown" => ProblemId::Brown,
            "5" | "beale" => ProblemId::Beale,
            "a" | "hueso" | "huesomonteiro" => ProblemId::Hueso,
            "b" | "fujisawa" => ProblemId::Fujisawa,
            _ => return Err(UnknownProblem(s.to_string())),
        })
    }
}

/// A registered benchmark system.
#[derive(Debug)]
pub struct Problem {
    pub id: ProblemId,
    pub name: &'static str,
    residual: fn(Vec2) -> Vec2,
    jacobian: fn(Vec2) -> Mat2,
    term_norms: fn(Vec2) -> Vec2,
    domain_guard: fn(Vec2) -> Option<&'static str>,
    /// Every registered starting point.
    pub starts: &'static [Vec2],
    /// Starting points that appear as rows of the comparison tables.
    pub table_starts: &'static [Vec2],
    /// Reference roots.
    pub roots: &'static [Vec2],
}

impl Problem {
    fn guard(&self, x: Vec2) -> Result<(), DomainError> {
        match (self.domain_guard)(x) {
            None => Ok(()),
            Some(reason) => Err(DomainError {
                problem: self.name,
                point: x,
                reason,
            }),
        }
    }

    /// Closest registered root to `x` together with its distance.
    pub fn nearest_root(&self, x: Vec2) -> Option<(Vec2, f64)> {
        self.roots
            .iter()
            .map(|r| (*r, (x - *r).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

impl System for Problem {
    fn name(&self) -> &'static str {
        self.name
    }

    fn check_domain(&self, x: Vec2) -> Result<(), DomainError> {
        self.guard(x)
    }

    fn residual(&self, x: Vec2) -> Result<Vec2, DomainError> {
        self.guard(x)?;
        Ok((self.residual)(x))
    }

    fn jacobian(&self, x: Vec2) -> Result<Mat2, DomainError> {
        self.guard(x)?;
        Ok((self.jacobian)(x))
    }

    fn term_norms(&self, x: Vec2) -> Result<Vec2, DomainError> {
        self.guard(x)?;
        Ok((self.term_norms)(x))
    }
}

/// Looks up the immutable definition of a benchmark problem.
pub fn registry(id: ProblemId) -> &'static Problem {
    match id {
        ProblemId::Rosenbrock => &ROSENBROCK,
        ProblemId::FreudensteinRoth => &FREUDENSTEIN_ROTH,
        ProblemId::Powell => &POWELL,
        ProblemId::Brown => &BROWN,
        ProblemId::Beale => &BEALE,
        ProblemId::Hueso => &HUESO,
        ProblemId::Fujisawa => &FUJISAWA,
    }
}

pub fn eval_residual(problem: &Problem, x: Vec2) -> Result<Vec2, DomainError> {
    problem.residual(x)
}

pub fn eval_jacobian(problem: &Problem, x: Vec2) -> Result<Mat2, DomainError> {
    problem.jacobian(x)
}

pub fn known_roots(id: ProblemId) -> &'static [Vec2] {
    registry(id).roots
}

/// Every `(problem, start)` row of the comparison tables, in table order.
pub fn table_cases() -> Vec<(ProblemId, Vec2)> {
    ProblemId::ALL
        .iter()
        .flat_map(|&id| registry(id).table_starts.iter().map(move |&x0| (id, x0)))
        .collect()
}

fn no_guard(_: Vec2) -> Option<&'static str> {
    None
}

const fn v(e0: f64, e1: f64) -> Vec2 {
    Vec2::new(e0, e1)
}

// Rosenbrock: f_x = 10(y − x²), f_y = 1 − x.
static ROSENBROCK: Problem = Problem {
    id: ProblemId::Rosenbrock,
    name: "rosenbrock",
    residual: |p| v(10.0 * (p.e1 - p.e0 * p.e0), 1.0 - p.e0),
    jacobian: |p| Mat2::new(-20.0 * p.e0, 10.0, -1.0, 0.0),
    term_norms: |p| v((10.0 * p.e1).abs() + 10.0 * p.e0 * p.e0, 1.0 + p.e0.abs()),
    domain_guard: no_guard,
    starts: &[v(-1.2, 1.0), v(1.2, 1.0)],
    table_starts: &[v(-1.2, 1.0)],
    roots: &[v(1.0, 1.0)],
};

// Freudenstein-Roth: f_x = −13 + x + ((5 − y)y − 2)y,
//                    f_y = −29 + x + ((y + 1)y − 14)y.
static FREUDENSTEIN_ROTH: Problem = Problem {
    id: ProblemId::FreudensteinRoth,
    name: "freudenstein-roth",
    residual: |p| {
        let (x, y) = (p.e0, p.e1);
        v(
            -13.0 + x + ((5.0 - y) * y - 2.0) * y,
            -29.0 + x + ((y + 1.0) * y - 14.0) * y,
        )
    },
    jacobian: |p| {
        let y = p.e1;
        Mat2::new(
            1.0,
            10.0 * y - 3.0 * y * y - 2.0,
            1.0,
            3.0 * y * y + 2.0 * y - 14.0,
        )
    },
    term_norms: |p| {
        let (x, y) = (p.e0.abs(), p.e1.abs());
        v(
            13.0 + x + 5.0 * y * y + y * y * y + 2.0 * y,
            29.0 + x + y * y * y + y * y + 14.0 * y,
        )
    },
    domain_guard: no_guard,
    starts: &[v(6.0, 3.0)],
    table_starts: &[v(6.0, 3.0)],
    roots: &[v(5.0, 4.0)],
};

// Powell badly scaled: f_x = 10⁴xy − 1, f_y = e^(−x) + e^(−y) − 1.0001.
static POWELL: Problem = Problem {
    id: ProblemId::Powell,
    name: "powell",
    residual: |p| {
        v(
            1e4 * p.e0 * p.e1 - 1.0,
            (-p.e0).exp() + (-p.e1).exp() - 1.0001,
        )
    },
    jacobian: |p| Mat2::new(1e4 * p.e1, 1e4 * p.e0, -(-p.e0).exp(), -(-p.e1).exp()),
    term_norms: |p| {
        v(
            (1e4 * p.e0 * p.e1).abs() + 1.0,
            (-p.e0).exp() + (-p.e1).exp() + 1.0001,
        )
    },
    domain_guard: no_guard,
    starts: &[v(0.0, 1.0), v(1.0, 1.0)],
    table_starts: &[v(0.0, 1.0), v(1.0, 1.0)],
    roots: &[
        v(1.098159329699817e-5, 9.106146739866524),
        v(9.106146739866524, 1.098159329699817e-5),
    ],
};

// Brown badly scaled: f_x = xy² − 2y + x − 10⁶, f_y = x²y − 2x + y − 2·10⁻⁶.
static BROWN: Problem = Problem {
    id: ProblemId::Brown,
    name: "brown",
    residual: |p| {
        let (x, y) = (p.e0, p.e1);
        v(
            x * y * y - 2.0 * y + x - 1e6,
            x * x * y - 2.0 * x + y - 2e-6,
        )
    },
    jacobian: |p| {
        let (x, y) = (p.e0, p.e1);
        let off = 2.0 * x * y - 2.0;
        Mat2::new(y * y + 1.0, off, off, x * x + 1.0)
    },
    term_norms: |p| {
        let (x, y) = (p.e0, p.e1);
        v(
            (x * y * y).abs() + 2.0 * y.abs() + x.abs() + 1e6,
            (x * x * y).abs() + 2.0 * x.abs() + y.abs() + 2e-6,
        )
    },
    domain_guard: no_guard,
    starts: &[v(1.0, 1.0)],
    table_starts: &[v(1.0, 1.0)],
    roots: &[v(1e6, 2e-6)],
};

// Beale: f_x = 1.5 − x(1 − y), f_y = 2.25 − x(1 − y²).
static BEALE: Problem = Problem {
    id: ProblemId::Beale,
    name: "beale",
    residual: |p| {
        let (x, y) = (p.e0, p.e1);
        v(1.5 - x * (1.0 - y), 2.25 - x * (1.0 - y * y))
    },
    jacobian: |p| {
        let (x, y) = (p.e0, p.e1);
        Mat2::new(y - 1.0, x, y * y - 1.0, 2.0 * x * y)
    },
    term_norms: |p| {
        let (x, y) = (p.e0, p.e1);
        v(
            1.5 + x.abs() + (x * y).abs(),
            2.25 + x.abs() + (x * y * y).abs(),
        )
    },
    domain_guard: no_guard,
    starts: &[v(1.0, 1.0), v(0.0, 2.0)],
    table_starts: &[v(1.0, 1.0), v(0.0, 2.0)],
    roots: &[v(3.0, 0.5)],
};

/// Below this `|y|` the Hueso-Monteiro residual is rejected.
pub const HUESO_MIN_ABS_Y: f64 = 1e-12;

// Hueso-Monteiro: f_x = (x − 1)²(x − y), f_y = (y − 2)⁵ cos(2x/y).
static HUESO: Problem = Problem {
    id: ProblemId::Hueso,
    name: "hueso",
    residual: |p| {
        let (x, y) = (p.e0, p.e1);
        v(
            (x - 1.0).powi(2) * (x - y),
            (y - 2.0).powi(5) * (2.0 * x / y).cos(),
        )
    },
    jacobian: |p| {
        let (x, y) = (p.e0, p.e1);
        let arg = 2.0 * x / y;
        let (s, c) = arg.sin_cos();
        let y2_5 = (y - 2.0).powi(5);
        Mat2::new(
            2.0 * (x - 1.0) * (x - y) + (x - 1.0).powi(2),
            -(x - 1.0).powi(2),
            -y2_5 * s * 2.0 / y,
            5.0 * (y - 2.0).powi(4) * c + y2_5 * s * 2.0 * x / (y * y),
        )
    },
    // (x − 1)²(x − y) = x³ − x²y − 2x² + 2xy + x − y, whose absolute terms sum
    // to (|x| + 1)²(|x| + |y|); (y − 2)⁵ expands to Σ C(5,k) yᵏ (−2)⁵⁻ᵏ,
    // whose absolute terms sum to (|y| + 2)⁵.
    term_norms: |p| {
        let (x, y) = (p.e0.abs(), p.e1.abs());
        v(
            (x + 1.0).powi(2) * (x + y),
            (2.0 * p.e0 / p.e1).cos().abs() * (y + 2.0).powi(5),
        )
    },
    domain_guard: |p| (p.e1.abs() < HUESO_MIN_ABS_Y).then_some("y must be nonzero"),
    starts: &[v(1.5, 2.5)],
    table_starts: &[v(1.5, 2.5)],
    roots: &[v(1.0, 2.0)],
};

// Fujisawa: f_x = x² + y² − 4, f_y = x²y − 1.
static FUJISAWA: Problem = Problem {
    id: ProblemId::Fujisawa,
    name: "fujisawa",
    residual: |p| {
        let (x, y) = (p.e0, p.e1);
        v(x * x + y * y - 4.0, x * x * y - 1.0)
    },
    jacobian: |p| {
        let (x, y) = (p.e0, p.e1);
        Mat2::new(2.0 * x, 2.0 * y, 2.0 * x * y, x * x)
    },
    term_norms: |p| {
        let (x, y) = (p.e0, p.e1);
        v(x * x + y * y + 4.0, (x * x * y).abs() + 1.0)
    },
    domain_guard: no_guard,
    starts: &[v(0.0, 1.0), v(0.0, -1.0)],
    table_starts: &[v(0.0, 1.0), v(0.0, -1.0)],
    roots: &[
        v(0.7330767879460008, 1.860805853111703),
        v(-0.7330767879460008, 1.860805853111703),
        v(1.983792411511353, 0.2541016883650524),
        v(-1.983792411511353, 0.2541016883650524),
    ],
};

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(id: ProblemId, x: f64, y: f64) -> Vec2 {
        registry(id).residual(v(x, y)).unwrap()
    }

    fn jac(id: ProblemId, x: f64, y: f64) -> Mat2 {
        registry(id).jacobian(v(x, y)).unwrap()
    }

    #[test]
    fn registry_is_total_and_ids_round_trip() {
        for id in ProblemId::ALL {
            let p = registry(id);
            assert_eq!(p.id, id);
            assert_eq!(id.name().parse::<ProblemId>().unwrap(), id);
            assert!(!p.starts.is_empty() && !p.roots.is_empty());
            assert!(p.table_starts.iter().all(|s| p.starts.contains(s)));
        }
        assert!("nope".parse::<ProblemId>().is_err());
        assert_eq!(table_cases().len(), 10);
    }

    #[test]
    fn rosenbrock_registers_both_starts() {
        let p = registry(ProblemId::Rosenbrock);
        assert_eq!(p.starts, &[v(-1.2, 1.0), v(1.2, 1.0)]);
        assert_eq!(p.table_starts, &[v(-1.2, 1.0)]);
    }

    #[test]
    fn residuals_vanish_at_exact_roots() {
        assert_eq!(residual(ProblemId::Rosenbrock, 1.0, 1.0), Vec2::ZERO);
        assert_eq!(residual(ProblemId::FreudensteinRoth, 5.0, 4.0), Vec2::ZERO);
        assert_eq!(residual(ProblemId::Beale, 3.0, 0.5), Vec2::ZERO);
        assert_eq!(residual(ProblemId::Hueso, 1.0, 2.0), Vec2::ZERO);
        let b = residual(ProblemId::Brown, 1e6, 2e-6);
        assert!(b.max_abs() <= 1e-6);
    }

    #[test]
    fn hand_evaluated_residuals() {
        let em1 = (-1.0f64).exp();
        let p = residual(ProblemId::Powell, 0.0, 1.0);
        assert_eq!(p.e0, -1.0);
        assert!((p.e1 - (1.0 + em1 - 1.0001)).abs() <= 1e-15);
        assert_eq!(residual(ProblemId::Fujisawa, 0.0, 1.0), v(-3.0, -1.0));
    }

    #[test]
    fn printed_jacobians_and_singular_points() {
        assert_eq!(jac(ProblemId::Powell, 1.0, 1.0).det(), 0.0);
        assert_eq!(jac(ProblemId::Fujisawa, 0.0, 1.0).det(), 0.0);
        assert_eq!(jac(ProblemId::Fujisawa, 0.0, -1.0).det(), 0.0);
        assert_eq!(jac(ProblemId::Beale, 1.0, 1.0).det(), 0.0);
        assert_eq!(jac(ProblemId::Beale, 0.0, 2.0).det(), 0.0);
        for (x, y) in [(0.3, -2.0), (-1.2, 1.0), (7.0, 0.0)] {
            assert_eq!(jac(ProblemId::Rosenbrock, x, y).det(), 10.0);
        }
        // det J = x(y − 1)² for Beale, 2x(x² − 2y²) for Fujisawa.
        let (x, y) = (1.5, -0.5);
        assert!((jac(ProblemId::Beale, x, y).det() - x * (y - 1.0) * (y - 1.0)).abs() < 1e-12);
        assert!(
            (jac(ProblemId::Fujisawa, x, y).det() - 2.0 * x * (x * x - 2.0 * y * y)).abs() < 1e-12
        );
    }

    #[test]
    fn hueso_rejects_zero_y() {
        let p = registry(ProblemId::Hueso);
        let err = p.residual(v(1.0, 0.0)).unwrap_err();
        assert_eq!(err.problem, "hueso");
        assert!(p.jacobian(v(1.0, 1e-13)).is_err());
        assert!(p.term_norms(v(1.0, -1e-14)).is_err());
        assert!(p.residual(v(1.0, 1e-11)).is_ok());
    }

    #[test]
    fn nearest_root_picks_closest() {
        let p = registry(ProblemId::Fujisawa);
        let (r, d) = p.nearest_root(v(-1.9, 0.3)).unwrap();
        assert_eq!(r, p.roots[3]);
        assert!(d < 0.1);
    }
}
