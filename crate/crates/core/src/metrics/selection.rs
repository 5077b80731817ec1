use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::metrics::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    /// The first sample whose loss is closest to the median.
    Median,
    /// Samples in the lowest 10% of the loss distribution.
    Easy,
    /// Samples in the highest 5% of the loss distribution.
    Hard,
}

impl FromStr for SelectionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "median" => Ok(Self::Median),
            "easy" => Ok(Self::Easy),
            "hard" => Ok(Self::Hard),
            other => Err(format!("unknown selection mode '{other}'")),
        }
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// `ceil(n * percent / 100)`, at least one.
fn tail_count(n: usize, percent: usize) -> usize {
    (n * percent).div_ceil(100).max(1)
}

/// Picks representative sample indices from per-sample losses (already
/// averaged across models). Returned indices are ascending. Quantile modes
/// include every sample tied with the cut-off value.
pub fn select_examples(losses: &[f64], mode: SelectionMode) -> Result<Vec<usize>, MetricsError> {
    if losses.is_empty() {
        return Err(MetricsError::EmptyLosses);
    }
    if let Some(i) = losses.iter().position(|l| !l.is_finite()) {
        return Err(MetricsError::NonFiniteLoss(i));
    }
    let mut sorted = losses.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = losses.len();

    let picked = match mode {
        SelectionMode::Median => {
            let m = median(&sorted);
            let mut best = 0;
            for (i, l) in losses.iter().enumerate() {
                if (l - m).abs() < (losses[best] - m).abs() {
                    best = i;
                }
            }
            vec![best]
        }
        SelectionMode::Easy => {
            let cut = sorted[tail_count(n, 10) - 1];
            (0..n).filter(|&i| losses[i] <= cut).collect()
        }
        SelectionMode::Hard => {
            let cut = sorted[n - tail_count(n, 5)];
            (0..n).filter(|&i| losses[i] >= cut).collect()
        }
    };
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_examples() {
        assert_eq!(select_examples(&[1.0, 2.0, 3.0, 4.0, 5.0], SelectionMode::Median), Ok(vec![2]));
        assert_eq!(select_examples(&[1.0, 1.0, 10.0], SelectionMode::Median), Ok(vec![0]));
        // even length: median 2.5, indices 1 and 2 equally close -> first
        assert_eq!(select_examples(&[4.0, 2.0, 3.0, 1.0], SelectionMode::Median), Ok(vec![1]));
    }

    #[test]
    fn quantile_counts() {
        let losses: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64).collect();
        let easy = select_examples(&losses, SelectionMode::Easy).unwrap();
        assert_eq!(easy.len(), 10);
        assert!(easy.iter().all(|&i| losses[i] < 10.0));
        let hard = select_examples(&losses, SelectionMode::Hard).unwrap();
        assert_eq!(hard.len(), 5);
        assert!(hard.iter().all(|&i| losses[i] >= 95.0));
    }

    #[test]
    fn ties_resolved_toward_inclusion() {
        let mut losses = vec![5.0; 20];
        losses[0] = 1.0;
        // 10% of 20 = 2; the second-lowest value 5.0 is shared by 19 samples
        assert_eq!(select_examples(&losses, SelectionMode::Easy).unwrap().len(), 20);
        assert_eq!(select_examples(&[3.0], SelectionMode::Hard), Ok(vec![0]));
    }

    #[test]
    fn errors() {
        assert_eq!(select_examples(&[], SelectionMode::Easy), Err(MetricsError::EmptyLosses));
        assert_eq!(
            select_examples(&[1.0, f64::NAN], SelectionMode::Median),
            Err(MetricsError::NonFiniteLoss(1))
        );
        assert!("sideways".parse::<SelectionMode>().is_err());
    }
}
