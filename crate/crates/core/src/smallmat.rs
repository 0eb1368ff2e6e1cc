//! Closed-form dense linear algebra for 2×2 real matrices.
//!
//! Everything here is exact-formula: determinants use a fused multiply-add
//! difference of products, eigenvalues come from the characteristic
//! quadratic, and the singular value decomposition is assembled from the
//! eigen-structure of `JᵀJ`. No iteration is involved anywhere.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::SolverError;

/// Smallest `|det A|` for which [`solve2`] will invert `A`.
pub const SOLVE_DET_FLOOR: f64 = 1e-300;

/// Default cutoff below which a singular value is treated as zero.
pub const DEFAULT_SIGMA_THRESHOLD: f64 = 1e-15;

/// A real 2-vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub e0: f64,
    pub e1: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { e0: 0.0, e1: 0.0 };

    pub const fn new(e0: f64, e1: f64) -> Self {
        Vec2 { e0, e1 }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.e0 * other.e0 + self.e1 * other.e1
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.e0.hypot(self.e1)
    }

    /// Largest absolute component.
    pub fn max_abs(self) -> f64 {
        self.e0.abs().max(self.e1.abs())
    }

    pub fn is_finite(self) -> bool {
        self.e0.is_finite() && self.e1.is_finite()
    }

    /// Counter-clockwise quarter turn: `(e0, e1) -> (-e1, e0)`.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.e1, self.e0)
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.e0, self.e1)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.e0 + rhs.e0, self.e1 + rhs.e1)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.e0 - rhs.e0, self.e1 - rhs.e1)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.e0, -self.e1)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.e0 * s, self.e1 * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

/// A real 2×2 matrix stored row-major as `[[a00, a01], [a10, a11]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a00: f64,
    pub a01: f64,
    pub a10: f64,
    pub a11: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);
    pub const ZERO: Mat2 = Mat2::new(0.0, 0.0, 0.0, 0.0);

    pub const fn new(a00: f64, a01: f64, a10: f64, a11: f64) -> Self {
        Mat2 { a00, a01, a10, a11 }
    }

    pub const fn diag(d0: f64, d1: f64) -> Self {
        Mat2::new(d0, 0.0, 0.0, d1)
    }

    pub fn from_cols(c0: Vec2, c1: Vec2) -> Self {
        Mat2::new(c0.e0, c1.e0, c0.e1, c1.e1)
    }

    /// Outer product `a·bᵀ`.
    pub fn outer(a: Vec2, b: Vec2) -> Self {
        Mat2::new(a.e0 * b.e0, a.e0 * b.e1, a.e1 * b.e0, a.e1 * b.e1)
    }

    pub fn col0(&self) -> Vec2 {
        Vec2::new(self.a00, self.a10)
    }

    pub fn col1(&self) -> Vec2 {
        Vec2::new(self.a01, self.a11)
    }

    pub fn det(&self) -> f64 {
        det2(self)
    }

    pub fn trace(&self) -> f64 {
        trace2(self)
    }

    pub fn transpose(&self) -> Mat2 {
        transpose2(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.a00
            .abs()
            .max(self.a01.abs())
            .max(self.a10.abs())
            .max(self.a11.abs())
    }

    pub fn frobenius_norm(&self) -> f64 {
        (self.a00 * self.a00 + self.a01 * self.a01 + self.a10 * self.a10 + self.a11 * self.a11)
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.a00.is_finite() && self.a01.is_finite() && self.a10.is_finite() && self.a11.is_finite()
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Mat2 {
        Mat2::new(f(self.a00), f(self.a01), f(self.a10), f(self.a11))
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        Mat2::new(
            self.a00 + rhs.a00,
            self.a01 + rhs.a01,
            self.a10 + rhs.a10,
            self.a11 + rhs.a11,
        )
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        Mat2::new(
            self.a00 - rhs.a00,
            self.a01 - rhs.a01,
            self.a10 - rhs.a10,
            self.a11 - rhs.a11,
        )
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        matmul2(&self, &rhs)
    }
}

impl Mul<Vec2> for Mat2 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        matvec2(&self, v)
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        self.map(|a| a * s)
    }
}

pub fn matmul2(a: &Mat2, b: &Mat2) -> Mat2 {
    Mat2::new(
        a.a00 * b.a00 + a.a01 * b.a10,
        a.a00 * b.a01 + a.a01 * b.a11,
        a.a10 * b.a00 + a.a11 * b.a10,
        a.a10 * b.a01 + a.a11 * b.a11,
    )
}

pub fn matvec2(a: &Mat2, v: Vec2) -> Vec2 {
    Vec2::new(a.a00 * v.e0 + a.a01 * v.e1, a.a10 * v.e0 + a.a11 * v.e1)
}

pub fn transpose2(a: &Mat2) -> Mat2 {
    Mat2::new(a.a00, a.a10, a.a01, a.a11)
}

pub fn trace2(a: &Mat2) -> f64 {
    a.a00 + a.a11
}

/// `a00·a11 − a01·a10`, evaluated with Kahan's FMA scheme so the result is
/// correct to a few ulps even under heavy cancellation. Two equal products
/// give exactly zero.
pub fn det2(a: &Mat2) -> f64 {
    let w = a.a01 * a.a10;
    let err = (-a.a01).mul_add(a.a10, w);
    let main = a.a00.mul_add(a.a11, -w);
    main + err
}

/// Eigenvalues of a 2×2 real matrix together with its trace and determinant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigPair2 {
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
    /// Trace.
    pub alpha: f64,
    /// Determinant.
    pub beta: f64,
}

/// Roots of `λ² − αλ + β = 0` with `α = tr A`, `β = det A`.
///
/// Real roots are ordered by magnitude: `lambda_plus` takes the sign of the
/// trace and `lambda_minus = β / lambda_plus`. A singular matrix therefore
/// always yields `lambda_plus = tr A` and `lambda_minus = 0`.
pub fn eig2(a: &Mat2) -> EigPair2 {
    let alpha = trace2(a);
    let beta = det2(a);
    let disc = alpha.mul_add(alpha, -4.0 * beta);
    let (lambda_plus, lambda_minus) = if disc >= 0.0 {
        let root = disc.sqrt();
        let q = if alpha < 0.0 {
            0.5 * (alpha - root)
        } else {
            0.5 * (alpha + root)
        };
        if q == 0.0 {
            (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
        } else {
            (Complex64::new(q, 0.0), Complex64::new(beta / q, 0.0))
        }
    } else {
        let im = 0.5 * (-disc).sqrt();
        (
            Complex64::new(0.5 * alpha, im),
            Complex64::new(0.5 * alpha, -im),
        )
    };
    EigPair2 {
        lambda_plus,
        lambda_minus,
        alpha,
        beta,
    }
}

/// Ordered singular values, `plus ≥ minus ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularValues {
    pub plus: f64,
    pub minus: f64,
}

impl SingularValues {
    /// `σ₋/σ₊`, or 0 when `σ₊ = 0`.
    pub fn ratio(&self) -> f64 {
        if self.plus > 0.0 {
            (self.minus / self.plus).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// `J = U·diag(σ₊, σ₋)·Vᵀ`. Columns of `U` are `u₊, u₋`; columns of `V` are
/// `v₊, v₋`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvdResult {
    pub u: Mat2,
    pub sigma: SingularValues,
    pub v: Mat2,
}

impl SvdResult {
    pub fn u_plus(&self) -> Vec2 {
        self.u.col0()
    }

    pub fn u_minus(&self) -> Vec2 {
        self.u.col1()
    }

    pub fn v_plus(&self) -> Vec2 {
        self.v.col0()
    }

    pub fn v_minus(&self) -> Vec2 {
        self.v.col1()
    }

    pub fn reconstruct(&self) -> Mat2 {
        self.u * Mat2::diag(self.sigma.plus, self.sigma.minus) * self.v.transpose()
    }
}

// Largest-magnitude component non-negative; ties go to e0.
fn canonical_sign(v: Vec2) -> Vec2 {
    let pivot = if v.e1.abs() > v.e0.abs() { v.e1 } else { v.e0 };
    if pivot < 0.0 {
        -v
    } else {
        v
    }
}

// First component non-negative; e1 decides when e0 is zero.
fn first_nonneg(v: Vec2) -> Vec2 {
    if v.e0 < 0.0 || (v.e0 == 0.0 && v.e1 < 0.0) {
        -v
    } else {
        v
    }
}

// Power of two close to `1/m`, so rescaling by it is exact.
fn pow2_inverse(m: f64) -> f64 {
    let exp = m.log2().floor().clamp(-1000.0, 1000.0) as i32;
    2f64.powi(-exp)
}

/// Closed-form SVD of a 2×2 real matrix.
///
/// `σ₊²` is the dominant root of the characteristic quadratic of `JᵀJ`, and
/// `σ₋ = |det J| / σ₊`. `v₊` is the larger-norm row of `JᵀJ − σ₋²I`
/// normalised. `v₋` is its quarter turn. Each column of `V` has its
/// largest-magnitude component non-negative. `u₊ = Jv₊/σ₊`, and `u₋` is the
/// quarter turn of `u₊` signed so that `Jv₋ = σ₋u₋`. When `σ₋ = 0`, `u₋`
/// has a non-negative first component.
///
/// The input is rescaled by a power of two before squaring, so entries near
/// the overflow limit are handled. The zero matrix gives `U = V = I`, `Σ = 0`.
pub fn svd2(j: &Mat2) -> SvdResult {
    let scale = j.max_abs();
    if scale == 0.0 || !scale.is_finite() {
        let nan = if scale == 0.0 { 0.0 } else { f64::NAN };
        return SvdResult {
            u: Mat2::IDENTITY,
            sigma: SingularValues {
                plus: nan,
                minus: nan,
            },
            v: Mat2::IDENTITY,
        };
    }
    let k = pow2_inverse(scale);
    let a = *j * k;

    let m00 = a.a00 * a.a00 + a.a10 * a.a10;
    let m01 = a.a00 * a.a01 + a.a10 * a.a11;
    let m11 = a.a01 * a.a01 + a.a11 * a.a11;

    let half_trace = 0.5 * (m00 + m11);
    let radius = (0.5 * (m00 - m11)).hypot(m01);
    let sp = (half_trace + radius).sqrt();
    let det = det2(&a);
    let sm = (det.abs() / sp).min(sp);
    let sm_sq = sm * sm;

    let r0 = Vec2::new(m00 - sm_sq, m01);
    let r1 = Vec2::new(m01, m11 - sm_sq);
    let row = if r1.norm_sq() > r0.norm_sq() { r1 } else { r0 };
    let v_plus = canonical_sign(row.normalized().unwrap_or(Vec2::new(1.0, 0.0)));
    let v_minus = canonical_sign(v_plus.perp());
    let v = Mat2::from_cols(v_plus, v_minus);

    let u_plus = (a * v_plus).normalized().unwrap_or(Vec2::new(1.0, 0.0));
    let u_minus = if det != 0.0 {
        // det J = det U · σ₊σ₋ · det V, and det[u, perp(u)] = 1.
        let s = det.signum() * det2(&v).signum();
        u_plus.perp() * s
    } else {
        first_nonneg(u_plus.perp())
    };

    SvdResult {
        u: Mat2::from_cols(u_plus, u_minus),
        sigma: SingularValues {
            plus: sp / k,
            minus: sm / k,
        },
        v,
    }
}

/// How the zero cutoff for a singular value is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    /// `σ < threshold · max(1, σ₊)`.
    #[default]
    Relative,
    /// `σ < threshold`.
    Absolute,
}

impl std::str::FromStr for ThresholdMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "relative" | "rel" => Ok(ThresholdMode::Relative),
            "absolute" | "abs" => Ok(ThresholdMode::Absolute),
            other => Err(format!("unknown threshold mode '{other}'")),
        }
    }
}

/// Cutoff used to decide that a singular value vanishes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroThreshold {
    pub value: f64,
    pub mode: ThresholdMode,
}

impl Default for ZeroThreshold {
    fn default() -> Self {
        ZeroThreshold {
            value: DEFAULT_SIGMA_THRESHOLD,
            mode: ThresholdMode::Relative,
        }
    }
}

impl ZeroThreshold {
    pub fn new(value: f64, mode: ThresholdMode) -> Self {
        ZeroThreshold { value, mode }
    }

    /// The absolute cutoff for a matrix whose largest singular value is
    /// `sigma_plus`.
    pub fn limit(&self, sigma_plus: f64) -> f64 {
        match self.mode {
            ThresholdMode::Relative => self.value * sigma_plus.max(1.0),
            ThresholdMode::Absolute => self.value,
        }
    }

    pub fn is_zero(&self, sigma: f64, sigma_plus: f64) -> bool {
        sigma < self.limit(sigma_plus)
    }
}

/// Regularised inverse `Σ̂⁻¹`: the reciprocal of every singular value above
/// the cutoff, and 1 in place of every vanishing one.
pub fn reg_inv_sigma(sigma: SingularValues, threshold: &ZeroThreshold) -> Mat2 {
    let inv = |s: f64| {
        if threshold.is_zero(s, sigma.plus) {
            1.0
        } else {
            1.0 / s
        }
    };
    Mat2::diag(inv(sigma.plus), inv(sigma.minus))
}

/// Solves `A·x = b` with the explicit 2×2 inverse.
pub fn solve2(a: &Mat2, b: Vec2) -> Result<Vec2, SolverError> {
    let det = det2(a);
    if det.is_nan() || det.abs() <= SOLVE_DET_FLOOR {
        return Err(SolverError::SingularMatrix { det });
    }
    Ok(Vec2::new(
        (a.a11 * b.e0 - a.a01 * b.e1) / det,
        (a.a00 * b.e1 - a.a10 * b.e0) / det,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn mat_close(a: &Mat2, b: &Mat2, tol: f64) -> bool {
        (*a - *b).max_abs() <= tol
    }

    #[test]
    fn det_of_small_integer_matrix() {
        assert_eq!(det2(&Mat2::new(1.0, 2.0, 3.0, 4.0)), -2.0);
    }

    #[test]
    fn identity_and_transpose_laws() {
        let a = Mat2::new(1.5, -2.0, 0.25, 7.0);
        assert_eq!(matmul2(&Mat2::IDENTITY, &a), a);
        assert_eq!(transpose2(&transpose2(&a)), a);
        assert_eq!(trace2(&a), 8.5);
        assert_eq!(matvec2(&a, Vec2::new(1.0, 0.0)), a.col0());
    }

    #[test]
    fn eig_of_diagonal() {
        let e = eig2(&Mat2::diag(2.0, 1.0));
        assert_eq!(e.lambda_plus, Complex64::new(2.0, 0.0));
        assert_eq!(e.lambda_minus, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn eig_of_rotation_is_imaginary_pair() {
        let e = eig2(&Mat2::new(0.0, 1.0, -1.0, 0.0));
        assert!(close(e.lambda_plus.re, 0.0, 1e-15) && close(e.lambda_plus.im, 1.0, 1e-15));
        assert!(close(e.lambda_minus.re, 0.0, 1e-15) && close(e.lambda_minus.im, -1.0, 1e-15));
    }

    #[test]
    fn eig_of_singular_matrix_has_trace_and_zero() {
        for (a, b) in [
            (Vec2::new(1.0, 2.0), Vec2::new(3.0, -1.0)),
            (Vec2::new(-2.0, 0.5), Vec2::new(1.0, 4.0)),
        ] {
            let m = Mat2::outer(a, b);
            let e = eig2(&m);
            assert_eq!(e.lambda_plus.im, 0.0);
            assert!(close(e.lambda_plus.re, m.trace(), 1e-12 * m.trace().abs()));
            assert!(e.lambda_minus.norm() <= 1e-12 * m.trace().abs());
        }
    }

    #[test]
    fn svd_of_identity() {
        let s = svd2(&Mat2::IDENTITY);
        assert_eq!(s.u, Mat2::IDENTITY);
        assert_eq!(s.v, Mat2::IDENTITY);
        assert_eq!((s.sigma.plus, s.sigma.minus), (1.0, 1.0));
    }

    #[test]
    fn svd_of_singular_diagonal() {
        let s = svd2(&Mat2::diag(3.0, 0.0));
        assert_eq!((s.sigma.plus, s.sigma.minus), (3.0, 0.0));
        assert!(mat_close(&s.reconstruct(), &Mat2::diag(3.0, 0.0), 1e-15));
    }

    #[test]
    fn svd_of_zero_matrix() {
        let s = svd2(&Mat2::ZERO);
        assert_eq!(s.u, Mat2::IDENTITY);
        assert_eq!(s.v, Mat2::IDENTITY);
        assert_eq!((s.sigma.plus, s.sigma.minus), (0.0, 0.0));
        assert_eq!(s.sigma.ratio(), 0.0);
    }

    #[test]
    fn svd_of_singular_powell_jacobian() {
        let em1 = (-1.0f64).exp();
        let j = Mat2::new(1e4, 1e4, -em1, -em1);
        let s = svd2(&j);
        // σ₊² = tr(JᵀJ) when det(JᵀJ) = 0.
        let expected = (2.0 * (1e8 + em1 * em1)).sqrt();
        assert!(close(s.sigma.plus, expected, 1e-12 * expected));
        assert!(s.sigma.minus <= 1e-10);
        let rank1 = Mat2::outer(s.u_plus(), s.v_plus()) * s.sigma.plus;
        assert!((j - rank1).max_abs() <= 1e-10 * s.sigma.plus);
    }

    #[test]
    fn svd_sign_convention() {
        let s = svd2(&Mat2::new(-1.0, 2.0, 0.5, -3.0));
        for v in [s.v_plus(), s.v_minus()] {
            let pivot = if v.e1.abs() > v.e0.abs() { v.e1 } else { v.e0 };
            assert!(pivot >= 0.0);
        }
        let jv = Mat2::new(-1.0, 2.0, 0.5, -3.0) * s.v_minus();
        assert!(jv.dot(s.u_minus()) > 0.0);
    }

    #[test]
    fn svd_handles_extreme_scales() {
        for k in [1e-200, 1e200] {
            let j = Mat2::new(3.0, 1.0, -2.0, 5.0) * k;
            let s = svd2(&j);
            assert!(s.sigma.plus.is_finite() && s.sigma.minus.is_finite());
            assert!((s.reconstruct() - j).max_abs() <= 1e-13 * s.sigma.plus);
        }
    }

    #[test]
    fn reg_inv_sigma_cases() {
        let t = ZeroThreshold::default();
        let sv = |plus, minus| SingularValues { plus, minus };
        assert_eq!(reg_inv_sigma(sv(2.0, 0.5), &t), Mat2::diag(0.5, 2.0));
        assert_eq!(reg_inv_sigma(sv(2.0, 0.0), &t), Mat2::diag(0.5, 1.0));
        assert_eq!(
            reg_inv_sigma(
                sv(2.0, 0.0),
                &ZeroThreshold::new(0.1, ThresholdMode::Absolute)
            ),
            Mat2::diag(0.5, 1.0)
        );
        assert_eq!(reg_inv_sigma(sv(0.0, 0.0), &t), Mat2::diag(1.0, 1.0));
    }

    #[test]
    fn relative_threshold_scales_with_sigma_plus() {
        let sv = SingularValues {
            plus: 1e6,
            minus: 5e-9,
        };
        let rel = ZeroThreshold::new(1e-15, ThresholdMode::Relative);
        let abs = ZeroThreshold::new(1e-15, ThresholdMode::Absolute);
        assert_eq!(reg_inv_sigma(sv, &rel).a11, 1.0 / 5e-9);
        let sv = SingularValues {
            plus: 1e6,
            minus: 5e-10,
        };
        assert_eq!(reg_inv_sigma(sv, &rel).a11, 1.0);
        assert_eq!(reg_inv_sigma(sv, &abs).a11, 1.0 / 5e-10);
    }

    #[test]
    fn solve_identity_and_diagonal() {
        assert_eq!(
            solve2(&Mat2::IDENTITY, Vec2::new(3.0, 4.0)).unwrap(),
            Vec2::new(3.0, 4.0)
        );
        assert_eq!(
            solve2(&Mat2::diag(2.0, 4.0), Vec2::new(2.0, 4.0)).unwrap(),
            Vec2::new(1.0, 1.0)
        );
    }

    #[test]
    fn solve_rejects_singular_powell_jacobian() {
        let em1 = (-1.0f64).exp();
        let j = Mat2::new(1e4, 1e4, -em1, -em1);
        assert!(matches!(
            solve2(&j, Vec2::new(1.0, 2.0)),
            Err(SolverError::SingularMatrix { .. })
        ));
    }
}
