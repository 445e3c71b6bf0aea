//! Smooth tensor primitives: relaxed sorting, weighted softmax/softmin,
//! soft medians, and finite differences.
//!
//! Every op takes and returns tape scalars, so outputs stay differentiable
//! with respect to every input. Crisp behavior is recovered in the
//! high-steepness limit; low steepness trades accuracy for smoothness.

mod fdiff;
mod median;
mod softmax;
mod sort;

pub use fdiff::{finite_differences, finite_differences_grid, Axis, ScalarGrid};
pub use median::{soft_median_fast, soft_median_precise};
pub use softmax::{softmax, w_softmax, w_softmax_log_form, w_softmin};
pub use sort::{soft_sort, ExchangeRecord, SortOptions, SortResult};

use thiserror::Error;

use crate::autodiff::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum OpsError {
    #[error("input must contain at least one element")]
    EmptyInput,
    #[error("expected {expected} elements, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("input needs at least {needed} elements along the axis, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("axis {axis} out of range for a {dims}-dimensional input")]
    AxisOutOfRange { axis: usize, dims: usize },
    #[error("entry {index} is not finite")]
    NonFiniteInput { index: usize },
    #[error("weight {index} is {value}; weights must lie in (0, 1]")]
    InvalidWeight { index: usize, value: f64 },
    #[error("steepness must be positive and finite, got {0}")]
    InvalidSteepness(f64),
}

pub(crate) fn validate_vector(xs: &[Scalar]) -> Result<(), OpsError> {
    if xs.is_empty() {
        return Err(OpsError::EmptyInput);
    }
    for (index, x) in xs.iter().enumerate() {
        if !x.value().is_finite() {
            return Err(OpsError::NonFiniteInput { index });
        }
    }
    Ok(())
}

pub(crate) fn validate_weights(ws: &[f64]) -> Result<(), OpsError> {
    for (index, &value) in ws.iter().enumerate() {
        if !(value > 0.0 && value <= 1.0) {
            return Err(OpsError::InvalidWeight { index, value });
        }
    }
    Ok(())
}

pub(crate) fn validate_steepness(s: f64) -> Result<(), OpsError> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(OpsError::InvalidSteepness(s));
    }
    Ok(())
}
