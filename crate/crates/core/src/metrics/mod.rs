//! Set-prediction metrics for emitter localization.
//!
//! All distances are Euclidean and in nanometres.

mod assignment;
mod chamfer;
mod detection;
pub mod report;
mod selection;

use thiserror::Error;

pub use assignment::{hungarian_assignment, hungarian_error, Assignment};
pub use chamfer::chamfer_distance;
pub use detection::{detection_report, DetectionReport, DEFAULT_TAU_NM};
pub use selection::{select_examples, SelectionMode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("{0} point set is empty")]
    EmptySet(&'static str),
    #[error("threshold must be positive and finite, got {0}")]
    InvalidTau(f64),
    #[error("loss vector is empty")]
    EmptyLosses,
    #[error("loss at index {0} is not finite")]
    NonFiniteLoss(usize),
}

pub(crate) fn check_nonempty<T>(pred: &[T], truth: &[T]) -> Result<(), MetricsError> {
    if pred.is_empty() {
        return Err(MetricsError::EmptySet("predicted"));
    }
    if truth.is_empty() {
        return Err(MetricsError::EmptySet("ground-truth"));
    }
    Ok(())
}
