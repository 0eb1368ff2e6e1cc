use thiserror::Error;

use crate::smallmat::Vec2;

/// Evaluation of a residual or Jacobian outside the problem's domain.
#[derive(Clone, Debug, PartialEq, Error)]
#[error("{problem}: point {point} is outside the domain ({reason})")]
pub struct DomainError {
    pub problem: &'static str,
    pub point: Vec2,
    pub reason: &'static str,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SolverError {
    /// The matrix could not be inverted at working precision.
    #[error("singular matrix (det = {det:e})")]
    SingularMatrix { det: f64 },
    #[error("non-finite iterate produced at step {step}")]
    NonFiniteIterate { step: usize },
    #[error(transparent)]
    Domain(#[from] DomainError),
}
