use serde::{Deserialize, Serialize};

use crate::metrics::{hungarian_assignment, MetricsError};
use crate::point::Point;

/// Matching threshold used for reported detection metrics.
pub const DEFAULT_TAU_NM: f64 = 20.0;

/// Thresholded detection counts over the optimal one-to-one matching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// `tp / |truth|`.
    pub detection_accuracy: f64,
    /// Root-mean-square distance over true-positive pairs; `None` without
    /// true positives.
    pub rmse_tp_nm: Option<f64>,
    pub tau_nm: f64,
}

/// A matched pair at distance `<= tau_nm` is a true positive. A matched pair
/// beyond `tau_nm` costs one false positive and one false negative;
/// unmatched predictions and truths are false positives and false
/// negatives respectively.
pub fn detection_report(
    pred: &[Point],
    truth: &[Point],
    tau_nm: f64,
) -> Result<DetectionReport, MetricsError> {
    if !(tau_nm > 0.0 && tau_nm.is_finite()) {
        return Err(MetricsError::InvalidTau(tau_nm));
    }
    let assignment = hungarian_assignment(pred, truth)?;
    let mut tp = 0;
    let mut sq_sum = 0.0;
    for d in assignment.pair_distances(pred, truth) {
        if d <= tau_nm {
            tp += 1;
            sq_sum += d * d;
        }
    }
    let far = assignment.pairs.len() - tp;
    Ok(DetectionReport {
        tp,
        fp: far + assignment.unmatched_pred.len(),
        fn_: far + assignment.unmatched_truth.len(),
        detection_accuracy: tp as f64 / truth.len() as f64,
        rmse_tp_nm: (tp > 0).then(|| (sq_sum / tp as f64).sqrt()),
        tau_nm,
    })
}
