//! Numerical verifiers for the spectral structure of the W4SV map.
//!
//! Linearising the map at a root gives the error propagation
//!
//! ```text
//! e⁽ⁿ⁺¹⁾ = W e⁽ⁿ⁾,   W = [ I        −Δτ·X      ]
//!                         [ Δτ·Y·J   (1 − 2Δτ)·I ]
//! ```
//!
//! For W4SV with a nonsingular Jacobian, `YJX = I`, so every eigenvalue of
//! `W` equals `1 − Δτ`. When the Jacobian has rank one, `YJX = diag(1, 0)`,
//! so `W` gains a unit eigenvalue. The checks below verify both facts
//! without a general eigensolver. They use `(W − (1−Δτ)I)² = 0` in the
//! nonsingular case and exact 4×4 determinants in the singular one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::problems::{registry, ProblemId, System};
use crate::smallmat::{svd2, Mat2, SvdResult, Vec2};
use crate::w4::{w4_step, w4sv_from_svd, w4sv_preconditioners, Preconditioners, W4Config, W4State};

pub type Mat4 = [[f64; 4]; 4];

/// The 4×4 error-propagation matrix of one W4 step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WMatrix {
    pub entries: Mat4,
    pub dtau: f64,
}

fn put_block(m: &mut Mat4, row: usize, col: usize, b: &Mat2) {
    m[row][col] = b.a00;
    m[row][col + 1] = b.a01;
    m[row + 1][col] = b.a10;
    m[row + 1][col + 1] = b.a11;
}

pub fn build_w_matrix(j: &Mat2, pre: &Preconditioners, dtau: f64) -> WMatrix {
    let mut m = [[0.0; 4]; 4];
    put_block(&mut m, 0, 0, &Mat2::IDENTITY);
    put_block(&mut m, 0, 2, &(pre.x * -dtau));
    put_block(&mut m, 2, 0, &(pre.y * *j * dtau));
    put_block(
        &mut m,
        2,
        2,
        &Mat2::diag(1.0 - 2.0 * dtau, 1.0 - 2.0 * dtau),
    );
    WMatrix { entries: m, dtau }
}

impl WMatrix {
    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .flatten()
            .map(|a| a * a)
            .sum::<f64>()
            .sqrt()
    }

    /// `W − s·I`.
    pub fn shifted(&self, s: f64) -> Mat4 {
        let mut m = self.entries;
        for (i, row) in m.iter_mut().enumerate() {
            row[i] -= s;
        }
        m
    }

    pub fn apply(&self, e: [f64; 4]) -> [f64; 4] {
        mat4_vec(&self.entries, &e)
    }
}

pub fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn mat4_vec(a: &Mat4, v: &[f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (o, row) in out.iter_mut().zip(a) {
        *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
    out
}

fn frobenius(m: &Mat4) -> f64 {
    m.iter().flatten().map(|a| a * a).sum::<f64>().sqrt()
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Cofactor expansion along the first row.
pub fn det4(m: &Mat4) -> f64 {
    (0..4)
        .map(|col| {
            let mut minor = [[0.0; 3]; 3];
            for (r, row) in m[1..].iter().enumerate() {
                let mut c = 0;
                for (k, &a) in row.iter().enumerate() {
                    if k != col {
                        minor[r][c] = a;
                        c += 1;
                    }
                }
            }
            let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[0][col] * det3(minor)
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NonsingularSpectrumReport {
    pub passed: bool,
    /// `‖(W − (1−Δτ)I)²‖_F`.
    pub residual: f64,
    pub tolerance: f64,
}

/// Certifies that every eigenvalue of `W` equals `1 − Δτ` by checking that
/// `W − (1−Δτ)I` squares to zero.
pub fn check_nonsingular_spectrum(w: &WMatrix) -> NonsingularSpectrumReport {
    let a = w.shifted(1.0 - w.dtau);
    let residual = frobenius(&mat4_mul(&a, &a));
    let tolerance = 1e-10 * (1.0 + w.frobenius_norm());
    NonsingularSpectrumReport {
        passed: residual <= tolerance,
        residual,
        tolerance,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SingularSpectrumReport {
    pub passed: bool,
    /// `det(W − I)`.
    pub det_unit: f64,
    /// `det(W − (1−Δτ)I)`.
    pub det_relaxed: f64,
    pub tolerance: f64,
}

/// Checks that both 1 and `1 − Δτ` are eigenvalues of `W`.
pub fn check_singular_spectrum(w: &WMatrix, dtau: f64) -> SingularSpectrumReport {
    let det_unit = det4(&w.shifted(1.0));
    let det_relaxed = det4(&w.shifted(1.0 - dtau));
    let tolerance = 1e-8 * w.frobenius_norm().powi(4);
    SingularSpectrumReport {
        passed: det_unit.abs() <= tolerance && det_relaxed.abs() <= tolerance,
        det_unit,
        det_relaxed,
        tolerance,
    }
}

/// Angles describing a step taken from a singular Jacobian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SingularStepGeometry {
    /// Angle between `u₊⁽ⁿ⁾` and `F(x⁽ⁿ⁾)`, in `[0, π]`.
    pub theta: f64,
    /// Angle between `v₊⁽ⁿ⁾` and `v₊⁽ⁿ⁺¹⁾`, in `[0, π]`.
    pub phi: f64,
    pub sigma_plus: f64,
    /// The increment has no component along `v₋⁽ⁿ⁾`.
    pub degenerate: bool,
}

pub const DEFAULT_EPS_ALIGN: f64 = 1e-8;

/// Evaluates the alignment condition under which the step after a singular
/// step makes no progress along the null direction: either
/// (i) `F ⟂ u₊⁽ⁿ⁾` and `v₊⁽ⁿ⁺¹⁾ ⟂ v₊⁽ⁿ⁾`, or (ii) `tan φ = σ₊ tan θ`.
pub fn singular_step_geometry(
    f: Vec2,
    svd_n: &SvdResult,
    svd_next: &SvdResult,
    eps_align: f64,
) -> SingularStepGeometry {
    let cos_theta = f
        .normalized()
        .map_or(1.0, |fh| fh.dot(svd_n.u_plus()))
        .clamp(-1.0, 1.0);
    let cos_phi = svd_n.v_plus().dot(svd_next.v_plus()).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    let phi = cos_phi.acos();
    let sigma_plus = svd_n.sigma.plus;

    let orthogonal_pair = cos_phi.abs() <= eps_align && cos_theta.abs() <= eps_align;
    let rhs = sigma_plus * theta.tan();
    let tangent_match = (phi.tan() - rhs).abs() <= eps_align * (1.0 + rhs.abs());
    SingularStepGeometry {
        theta,
        phi,
        sigma_plus,
        degenerate: orthogonal_pair || tangent_match,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncrementReport {
    pub passed: bool,
    /// `x⁽ⁿ⁺²⁾ − x⁽ⁿ⁺¹⁾` produced by two applications of the map.
    pub map_increment: Vec2,
    /// The same increment assembled from the singular vectors.
    pub formula_increment: Vec2,
    pub error: f64,
    pub tolerance: f64,
    pub geometry: SingularStepGeometry,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Runs two W4SV steps with `Δτ = 1/2` from `(x_n, p = 0)` and compares
/// the second increment against
/// `−(|F| cos θ)/(4σ₊)·v₊⁽ⁿ⁺¹⁾ − (|F| sin θ)/4·v₋⁽ⁿ⁺¹⁾`,
/// where `θ` is measured from `u₊⁽ⁿ⁾` towards `u₋⁽ⁿ⁾`.
///
/// `cfg.dtau` is ignored; the other fields supply the zero threshold.
pub fn verify_increment_formula<S: System + ?Sized>(
    system: &S,
    x_n: Vec2,
    cfg: &W4Config,
) -> IncrementReport {
    let dtau = 0.5;
    let threshold = cfg.zero_threshold();
    let fail = |note: String| IncrementReport {
        passed: false,
        map_increment: Vec2::ZERO,
        formula_increment: Vec2::ZERO,
        error: f64::NAN,
        tolerance: 0.0,
        geometry: SingularStepGeometry {
            theta: f64::NAN,
            phi: f64::NAN,
            sigma_plus: f64::NAN,
            degenerate: false,
        },
        note: Some(note),
    };
    let eval = |x: Vec2| -> Result<(Vec2, Mat2), String> {
        Ok((
            system.residual(x).map_err(|e| e.to_string())?,
            system.jacobian(x).map_err(|e| e.to_string())?,
        ))
    };

    let (f_n, j_n) = match eval(x_n) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    let svd_n = svd2(&j_n);
    if !threshold.is_zero(svd_n.sigma.minus, svd_n.sigma.plus) {
        return fail(format!(
            "Jacobian at {x_n} is not singular (sigma_minus = {:e})",
            svd_n.sigma.minus
        ));
    }

    // Map side.
    let s0 = W4State::new(x_n);
    let stepped = w4_step(&s0, f_n, &w4sv_preconditioners(&j_n, cfg), dtau).and_then(|s1| {
        let (f1, j1) = eval(s1.x).map_err(|_| crate::SolverError::NonFiniteIterate { step: 2 })?;
        let s2 = w4_step(&s1, f1, &w4sv_preconditioners(&j1, cfg), dtau)?;
        Ok((s1, s2, j1))
    });
    let (s1, s2, j1) = match stepped {
        Ok(v) => v,
        Err(e) => return fail(e.to_string()),
    };
    let map_increment = s2.x - s1.x;

    // Formula side.
    let svd_next = svd2(&j1);
    let f_abs = f_n.norm();
    let (cos_t, sin_t) = match f_n.normalized() {
        Some(fh) => (fh.dot(svd_n.u_plus()), fh.dot(svd_n.u_minus())),
        None => (1.0, 0.0),
    };
    let formula_increment = svd_next.v_plus() * (-(f_abs * cos_t) / (4.0 * svd_n.sigma.plus))
        - svd_next.v_minus() * (f_abs * sin_t / 4.0);

    let error = (map_increment - formula_increment).norm();
    let tolerance = 1e-10 * f_abs.max(f64::MIN_POSITIVE);
    IncrementReport {
        passed: error <= tolerance,
        map_increment,
        formula_increment,
        error,
        tolerance,
        geometry: singular_step_geometry(f_n, &svd_n, &svd_next, DEFAULT_EPS_ALIGN),
        note: None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContractionReport {
    pub passed: bool,
    /// Power of `W` at which every trial contracted, or the last one tried.
    pub k: u32,
    /// Largest `‖Wᵏe‖ / ‖e‖` seen.
    pub worst_ratio: f64,
    pub trials: usize,
}

/// Powers of `W` tried in order by [`check_error_contraction`].
pub const CONTRACTION_POWERS: [u32; 2] = [8, 64];

const CONTRACTION_SEED: u64 = 0x5747_3453;

fn mat4_pow(a: &Mat4, k: u32) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..k {
        out = mat4_mul(&out, a);
    }
    out
}

/// Checks `‖Wᵏe‖ < ‖e‖` for `trials` random error vectors, first with
/// `k = 8` and then `k = 64`.
///
/// `W` is generally not normal, so a single step need not shrink the error
/// even when the spectral radius is below one; a high enough power must.
pub fn check_error_contraction(w: &WMatrix, trials: usize) -> ContractionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(CONTRACTION_SEED);
    let samples: Vec<[f64; 4]> = (0..trials)
        .map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
        .collect();
    let mut last = None;
    for k in CONTRACTION_POWERS {
        let wk = mat4_pow(&w.entries, k);
        let mut worst = 0.0f64;
        let mut ok = true;
        for e in &samples {
            let n0 = e.iter().map(|a| a * a).sum::<f64>().sqrt();
            if n0 == 0.0 {
                continue;
            }
            let n1 = mat4_vec(&wk, e).iter().map(|a| a * a).sum::<f64>().sqrt();
            let ratio = n1 / n0;
            worst = worst.max(ratio);
            ok &= ratio < 1.0;
        }
        let report = ContractionReport {
            passed: ok,
            k,
            worst_ratio: worst,
            trials,
        };
        if ok {
            return report;
        }
        last = Some(report);
    }
    last.expect("at least one power is tried")
}

/// A random Jacobian with `|det J| ≥ 10⁻³‖J‖²_F`, scaled by up to two
/// decades either way.
pub fn random_nonsingular_jacobian<R: Rng>(rng: &mut R) -> Mat2 {
    loop {
        let j = Mat2::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let fro = j.frobenius_norm();
        if j.det().abs() >= 1e-3 * fro * fro {
            return j * 10f64.powf(rng.gen_range(-2.0..2.0));
        }
    }
}

/// A random rank-one Jacobian `s·a·bᵀ`.
pub fn random_rank1_jacobian<R: Rng>(rng: &mut R) -> Mat2 {
    loop {
        let a = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let b = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if a.norm() > 1e-3 && b.norm() > 1e-3 {
            return Mat2::outer(a, b) * 10f64.powf(rng.gen_range(-2.0..2.0));
        }
    }
}

/// The singular starting points of the comparison tables.
pub const SINGULAR_STARTS: [(ProblemId, Vec2); 5] = [
    (ProblemId::Powell, Vec2::new(1.0, 1.0)),
    (ProblemId::Beale, Vec2::new(1.0, 1.0)),
    (ProblemId::Beale, Vec2::new(0.0, 2.0)),
    (ProblemId::Fujisawa, Vec2::new(0.0, 1.0)),
    (ProblemId::Fujisawa, Vec2::new(0.0, -1.0)),
];

/// Pass count for one family of checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub passed: usize,
    pub total: usize,
}

impl SuiteOutcome {
    pub fn ok(&self) -> bool {
        self.passed == self.total
    }
}

/// Dtau values exercised by the nonsingular spectrum suite.
pub const SUITE_DTAUS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// Runs every spectral check on `samples` random Jacobians per family.
pub fn run_spectral_suite(samples: usize, seed: u64) -> Vec<SuiteOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = W4Config::default();
    let threshold = cfg.zero_threshold();
    let mut out = Vec::new();

    for dtau in SUITE_DTAUS {
        let passed = (0..samples)
            .filter(|_| {
                let j = random_nonsingular_jacobian(&mut rng);
                let pre = w4sv_from_svd(&svd2(&j), &threshold);
                check_nonsingular_spectrum(&build_w_matrix(&j, &pre, dtau)).passed
            })
            .count();
        out.push(SuiteOutcome {
            name: format!("nonsingular spectrum, dtau={dtau}"),
            passed,
            total: samples,
        });
    }

    let passed = (0..samples)
        .filter(|_| {
            let j = random_rank1_jacobian(&mut rng);
            let pre = w4sv_from_svd(&svd2(&j), &threshold);
            check_singular_spectrum(&build_w_matrix(&j, &pre, 0.5), 0.5).passed
        })
        .count();
    out.push(SuiteOutcome {
        name: "singular spectrum, rank-1 J, dtau=0.5".into(),
        passed,
        total: samples,
    });

    let passed = (0..samples)
        .filter(|_| {
            let j = random_nonsingular_jacobian(&mut rng);
            let pre = w4sv_from_svd(&svd2(&j), &threshold);
            check_error_contraction(&build_w_matrix(&j, &pre, 0.5), 16).passed
        })
        .count();
    out.push(SuiteOutcome {
        name: "error contraction, dtau=0.5".into(),
        passed,
        total: samples,
    });

    let passed = SINGULAR_STARTS
        .iter()
        .filter(|(id, x0)| verify_increment_formula(registry(*id), *x0, &cfg).passed)
        .count();
    out.push(SuiteOutcome {
        name: "increment formula at singular starts".into(),
        passed,
        total: SINGULAR_STARTS.len(),
    });
    out
}
