//! The W4 iteration.
//!
//! The map advances an iterate `x` and an auxiliary variable `p`:
//!
//! ```text
//! x' = x + Δτ·X·p
//! p' = (1 − 2Δτ)·p − Δτ·Y·F(x)
//! ```
//!
//! with preconditioners `X`, `Y` rebuilt from the Jacobian at every step.
//! The W4SV choice takes them from the singular value decomposition,
//! `X = V` and `Y = Σ̂⁻¹Uᵀ`, which stays finite when the Jacobian is singular.

use serde::{Deserialize, Serialize};

use crate::error::{DomainError, SolverError};
use crate::problems::System;
use crate::smallmat::{reg_inv_sigma, svd2, Mat2, SvdResult, ThresholdMode, Vec2, ZeroThreshold};

/// Iterates whose Euclidean norm exceeds this are declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e300;

/// Floor applied to each term norm in [`residual_metric`].
pub const TERM_NORM_FLOOR: f64 = 1e-30;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct W4State {
    pub x: Vec2,
    pub p: Vec2,
    pub step: usize,
}

impl W4State {
    /// Starts at `x0` with `p = 0`.
    pub fn new(x0: Vec2) -> Self {
        W4State {
            x: x0,
            p: Vec2::ZERO,
            step: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct W4Config {
    /// Step parameter Δτ in (0, 1].
    pub dtau: f64,
    pub max_iter: usize,
    /// Convergence threshold on [`residual_metric`].
    pub tol: f64,
    pub sigma_threshold: f64,
    pub threshold_mode: ThresholdMode,
}

impl Default for W4Config {
    fn default() -> Self {
        W4Config {
            dtau: 0.5,
            max_iter: 1_000_000,
            tol: 1e-8,
            sigma_threshold: crate::smallmat::DEFAULT_SIGMA_THRESHOLD,
            threshold_mode: ThresholdMode::Relative,
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("dtau must lie in (0, 1], got {0}")]
    Dtau(f64),
    #[error("tol must be positive, got {0}")]
    Tol(f64),
    #[error("max_iter must be at least 1")]
    MaxIter,
    #[error("sigma threshold must be positive, got {0}")]
    Threshold(f64),
}

impl W4Config {
    pub fn with_dtau(dtau: f64) -> Self {
        W4Config {
            dtau,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dtau > 0.0 && self.dtau <= 1.0) {
            return Err(ConfigError::Dtau(self.dtau));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(ConfigError::Tol(self.tol));
        }
        if self.max_iter == 0 {
            return Err(ConfigError::MaxIter);
        }
        if self.sigma_threshold.is_nan() || self.sigma_threshold <= 0.0 {
            return Err(ConfigError::Threshold(self.sigma_threshold));
        }
        Ok(())
    }

    pub fn zero_threshold(&self) -> ZeroThreshold {
        ZeroThreshold::new(self.sigma_threshold, self.threshold_mode)
    }
}

/// The matrix pair `(X, Y)` of one W4 step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Preconditioners {
    pub x: Mat2,
    pub y: Mat2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIterExceeded,
    Diverged,
    SingularAbort,
}

/// One row of a convergence trace, describing the iterate `x⁽ⁿ⁾`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub x: f64,
    pub y: f64,
    /// `σ₋/σ₊` of the Jacobian at this point, 0 when `σ₊ = 0`.
    pub sigma_ratio: f64,
    /// `f_x² + f_y²`.
    pub f_norm_sq: f64,
    pub err_metric: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Number of steps applied before the run stopped.
    pub iterations: usize,
    pub final_x: Vec2,
    /// One row per visited iterate, starting with `x⁽⁰⁾`.
    pub trace: Vec<TraceRow>,
    /// Reason for an abnormal stop.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub message: Option<String>,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn final_metric(&self) -> Option<f64> {
        self.trace.last().map(|r| r.err_metric)
    }
}

/// One application of the W4 map.
///
/// The update of `x` uses the current `p`, not the updated one.
pub fn w4_step(
    state: &W4State,
    f: Vec2,
    pre: &Preconditioners,
    dtau: f64,
) -> Result<W4State, SolverError> {
    let x = state.x + pre.x * state.p * dtau;
    let p = state.p * (1.0 - 2.0 * dtau) - pre.y * f * dtau;
    let step = state.step + 1;
    if !x.is_finite() || !p.is_finite() {
        return Err(SolverError::NonFiniteIterate { step });
    }
    Ok(W4State { x, p, step })
}

/// `X = V`, `Y = Σ̂⁻¹Uᵀ` from the SVD of `J`.
pub fn w4sv_preconditioners(j: &Mat2, cfg: &W4Config) -> Preconditioners {
    w4sv_from_svd(&svd2(j), &cfg.zero_threshold())
}

pub fn w4sv_from_svd(svd: &SvdResult, threshold: &ZeroThreshold) -> Preconditioners {
    Preconditioners {
        x: svd.v,
        y: reg_inv_sigma(svd.sigma, threshold) * svd.u.transpose(),
    }
}

fn metric_from(f: Vec2, norms: Vec2) -> f64 {
    let rx = f.e0.abs() / norms.e0.max(TERM_NORM_FLOOR);
    let ry = f.e1.abs() / norms.e1.max(TERM_NORM_FLOOR);
    // NaN must not be swallowed by f64::max.
    if rx.is_nan() || ry.is_nan() {
        f64::NAN
    } else {
        rx.max(ry)
    }
}

/// `max_i |F_i(x)| / ‖F_i‖(x)`, the term-normalised residual.
pub fn residual_metric<S: System + ?Sized>(system: &S, x: Vec2) -> Result<f64, DomainError> {
    Ok(metric_from(system.residual(x)?, system.term_norms(x)?))
}

/// Everything the drivers need to know about one iterate.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PointEval {
    pub f: Vec2,
    pub j: Mat2,
    pub svd: SvdResult,
    pub metric: f64,
}

pub(crate) fn evaluate<S: System + ?Sized>(system: &S, x: Vec2) -> Result<PointEval, DomainError> {
    let f = system.residual(x)?;
    let j = system.jacobian(x)?;
    let metric = metric_from(f, system.term_norms(x)?);
    Ok(PointEval {
        f,
        j,
        svd: svd2(&j),
        metric,
    })
}

/// Shared iteration loop.
///
/// At every iterate the metric is checked first, so a start that already
/// satisfies the tolerance reports zero iterations. `step` maps the current
/// point to the next one.
pub(crate) fn drive<S, F>(system: &S, x0: Vec2, cfg: &W4Config, mut step: F) -> SolveReport
where
    S: System + ?Sized,
    F: FnMut(usize, Vec2, &PointEval) -> Result<Vec2, SolverError>,
{
    let mut trace = Vec::new();
    let mut x = x0;
    let finish = |status, iterations, x, trace, message: Option<String>| SolveReport {
        status,
        iterations,
        final_x: x,
        trace,
        message,
    };
    if !x0.is_finite() {
        return finish(
            SolveStatus::Diverged,
            0,
            x0,
            trace,
            Some("non-finite starting point".into()),
        );
    }
    let mut n = 0;
    loop {
        let eval = match evaluate(system, x) {
            Ok(e) => e,
            Err(e) => return finish(SolveStatus::Diverged, n, x, trace, Some(e.to_string())),
        };
        trace.push(TraceRow {
            step: n,
            x: x.e0,
            y: x.e1,
            sigma_ratio: eval.svd.sigma.ratio(),
            f_norm_sq: eval.f.norm_sq(),
            err_metric: eval.metric,
        });
        if eval.metric < cfg.tol {
            return finish(SolveStatus::Converged, n, x, trace, None);
        }
        if n >= cfg.max_iter {
            return finish(SolveStatus::MaxIterExceeded, n, x, trace, None);
        }
        match step(n, x, &eval) {
            Ok(next) if next.is_finite() && next.norm() <= DIVERGENCE_NORM => x = next,
            Ok(next) => {
                let msg = format!("iterate left the finite range at step {}: {next}", n + 1);
                return finish(SolveStatus::Diverged, n, x, trace, Some(msg));
            }
            Err(e @ SolverError::SingularMatrix { .. }) => {
                return finish(SolveStatus::SingularAbort, n, x, trace, Some(e.to_string()))
            }
            Err(e) => return finish(SolveStatus::Diverged, n, x, trace, Some(e.to_string())),
        }
        n += 1;
    }
}

/// Runs the W4 map with preconditioners from `pre_fn(J(x⁽ⁿ⁾))`, starting
/// from `p⁽⁰⁾ = 0`.
pub fn solve_w4_generic<S, P>(system: &S, x0: Vec2, cfg: &W4Config, pre_fn: P) -> SolveReport
where
    S: System + ?Sized,
    P: Fn(&Mat2) -> Preconditioners,
{
    let mut state = W4State::new(x0);
    drive(system, x0, cfg, |_, _, eval| {
        let pre = pre_fn(&eval.j);
        state = w4_step(&state, eval.f, &pre, cfg.dtau)?;
        Ok(state.x)
    })
}

/// The W4SV solver.
pub fn solve_w4sv<S: System + ?Sized>(system: &S, x0: Vec2, cfg: &W4Config) -> SolveReport {
    solve_w4_generic(system, x0, cfg, |j| w4sv_preconditioners(j, cfg))
}
