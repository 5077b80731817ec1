use crate::metrics::{check_nonempty, MetricsError};
use crate::point::Point;

fn directed_mean(from: &[Point], to: &[Point]) -> f64 {
    let total: f64 = from
        .iter()
        .map(|a| to.iter().map(|b| a.dist(b)).fold(f64::INFINITY, f64::min))
        .sum();
    total / from.len() as f64
}

/// Symmetric Chamfer distance: the mean nearest-neighbour distance from
/// predictions to truth plus the mean from truth to predictions (unsquared).
pub fn chamfer_distance(pred: &[Point], truth: &[Point]) -> Result<f64, MetricsError> {
    check_nonempty(pred, truth)?;
    Ok(directed_mean(pred, truth) + directed_mean(truth, pred))
}
