//! Minimum-cost one-to-one matching between two point sets
//! (Kuhn-Munkres with row/column potentials, O(n^2 m)).

use crate::metrics::{check_nonempty, MetricsError};
use crate::point::Point;

/// Optimal partial bijection between predictions and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `(pred_idx, truth_idx)`, sorted by `pred_idx`.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_truth: Vec<usize>,
    pub total_cost_nm: f64,
}

impl Assignment {
    /// Distance of each matched pair, in `pairs` order.
    pub fn pair_distances(&self, pred: &[Point], truth: &[Point]) -> Vec<f64> {
        self.pairs
            .iter()
            .map(|&(p, t)| pred[p].dist(&truth[t]))
            .collect()
    }
}

/// Solves the assignment problem for a `rows x cols` cost matrix with
/// `rows <= cols`. Returns the column assigned to each row.
fn solve_rows_le_cols(cost: &[f64], rows: usize, cols: usize) -> Vec<usize> {
    debug_assert!(rows <= cols && cost.len() == rows * cols);
    let at = |i: usize, j: usize| cost[(i - 1) * cols + (j - 1)];
    // 1-based; index 0 of the column arrays is a virtual column
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];

    for i in 1..=rows {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let reduced = at(i0, j) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        // augment along the alternating path
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![usize::MAX; rows];
    for j in 1..=cols {
        if owner[j] != 0 {
            row_to_col[owner[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Minimum-total-distance matching of size `min(|pred|, |truth|)`.
/// Unmatched points on the larger side are listed separately.
pub fn hungarian_assignment(pred: &[Point], truth: &[Point]) -> Result<Assignment, MetricsError> {
    check_nonempty(pred, truth)?;
    let transpose = pred.len() > truth.len();
    let (rows, cols) = if transpose {
        (truth, pred)
    } else {
        (pred, truth)
    };
    let cost: Vec<f64> = rows
        .iter()
        .flat_map(|r| cols.iter().map(move |c| r.dist(c)))
        .collect();
    let matching = solve_rows_le_cols(&cost, rows.len(), cols.len());

    let mut pairs: Vec<(usize, usize)> = matching
        .iter()
        .enumerate()
        .map(|(r, &c)| if transpose { (c, r) } else { (r, c) })
        .collect();
    pairs.sort_unstable();

    let mut pred_used = vec![false; pred.len()];
    let mut truth_used = vec![false; truth.len()];
    let mut total_cost_nm = 0.0;
    for &(p, t) in &pairs {
        pred_used[p] = true;
        truth_used[t] = true;
        total_cost_nm += pred[p].dist(&truth[t]);
    }
    let unused = |flags: Vec<bool>| {
        flags
            .iter()
            .enumerate()
            .filter(|(_, &u)| !u)
            .map(|(i, _)| i)
            .collect()
    };
    Ok(Assignment {
        pairs,
        unmatched_pred: unused(pred_used),
        unmatched_truth: unused(truth_used),
        total_cost_nm,
    })
}

/// Mean distance over the optimally matched pairs.
pub fn hungarian_error(pred: &[Point], truth: &[Point]) -> Result<f64, MetricsError> {
    let a = hungarian_assignment(pred, truth)?;
    Ok(a.total_cost_nm / a.pairs.len() as f64)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive minimum over all injective maps of the smaller set into
    /// the larger one.
    pub(crate) fn brute_force_cost(pred: &[Point], truth: &[Point]) -> f64 {
        let (small, large) = if pred.len() <= truth.len() {
            (pred, truth)
        } else {
            (truth, pred)
        };
        fn rec(i: usize, small: &[Point], large: &[Point], used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if i == small.len() {
                *best = best.min(acc);
                return;
            }
            for j in 0..large.len() {
                if !used[j] {
                    used[j] = true;
                    rec(i + 1, small, large, used, acc + small[i].dist(&large[j]), best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(0, small, large, &mut vec![false; large.len()], 0.0, &mut best);
        best
    }

    fn pts(v: &[(f64, f64)]) -> Vec<Point> {
        v.iter().map(|&p| p.into()).collect()
    }

    #[test]
    fn two_by_two_example() {
        let pred = pts(&[(0.0, 0.0), (10.0, 0.0)]);
        let truth = pts(&[(0.0, 3.0), (10.0, 4.0)]);
        assert_eq!(hungarian_error(&pred, &truth), Ok(3.5));
        let a = hungarian_assignment(&pred, &truth).unwrap();
        assert_eq!(a.pairs, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn crossing_is_avoided() {
        // greedy nearest-first would match (0 -> 0) and pay for the long pair
        let pred = pts(&[(0.0, 0.0), (2.0, 0.0)]);
        let truth = pts(&[(1.0, 0.0), (-5.0, 0.0)]);
        let a = hungarian_assignment(&pred, &truth).unwrap();
        assert_eq!(a.pairs, vec![(0, 1), (1, 0)]);
        assert_eq!(a.total_cost_nm, 6.0);
    }

    #[test]
    fn permuted_copy_costs_zero() {
        let truth = pts(&[(1.0, 2.0), (30.0, 4.0), (-7.0, 9.5), (400.0, 400.0)]);
        let pred = vec![truth[2], truth[0], truth[3], truth[1]];
        let a = hungarian_assignment(&pred, &truth).unwrap();
        assert_eq!(a.total_cost_nm, 0.0);
        assert_eq!(a.pairs, vec![(0, 2), (1, 0), (2, 3), (3, 1)]);
        assert_eq!(hungarian_error(&pred, &truth), Ok(0.0));
    }

    #[test]
    fn rectangular_cardinality() {
        let pred = pts(&[(0.0, 0.0), (100.0, 0.0)]);
        let truth = pts(&[(1.0, 0.0), (99.0, 0.0), (50.0, 50.0)]);
        let a = hungarian_assignment(&pred, &truth).unwrap();
        assert_eq!(a.pairs.len(), 2);
        assert_eq!(a.unmatched_truth, vec![2]);
        assert!(a.unmatched_pred.is_empty());
        let b = hungarian_assignment(&truth, &pred).unwrap();
        assert_eq!(b.unmatched_pred, vec![2]);
        assert_eq!(b.total_cost_nm, a.total_cost_nm);
    }

    #[test]
    fn empty_rejected() {
        assert!(hungarian_assignment(&[], &pts(&[(0.0, 0.0)])).is_err());
        assert!(hungarian_error(&pts(&[(0.0, 0.0)]), &[]).is_err());
    }

    fn arb_set(max: usize) -> impl Strategy<Value = Vec<Point>> {
        prop::collection::vec((0.0f64..500.0, 0.0f64..500.0), 1..=max)
            .prop_map(|v| v.into_iter().map(Point::from).collect())
    }

    proptest! {
        #[test]
        fn matches_brute_force(pred in arb_set(7), truth in arb_set(7)) {
            let a = hungarian_assignment(&pred, &truth).unwrap();
            let oracle = brute_force_cost(&pred, &truth);
            prop_assert!((a.total_cost_nm - oracle).abs() <= 1e-9 * oracle.max(1.0));
            prop_assert_eq!(a.pairs.len(), pred.len().min(truth.len()));
            prop_assert_eq!(a.pairs.len() + a.unmatched_pred.len(), pred.len());
            prop_assert_eq!(a.pairs.len() + a.unmatched_truth.len(), truth.len());
        }

        #[test]
        fn error_permutation_invariant_and_bounded_below(pred in arb_set(8), truth in arb_set(8), k in 0usize..8) {
            let e = hungarian_error(&pred, &truth).unwrap();
            let mut shuffled = pred.clone();
            let k = k % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let e2 = hungarian_error(&shuffled, &truth).unwrap();
            prop_assert!((e - e2).abs() <= 1e-9 * e.max(1.0));
            // one-to-one is never cheaper than nearest-neighbour for the matched rows
            let a = hungarian_assignment(&pred, &truth).unwrap();
            let nn: f64 = a.pairs.iter()
                .map(|&(p, _)| truth.iter().map(|t| pred[p].dist(t)).fold(f64::INFINITY, f64::min))
                .sum::<f64>() / a.pairs.len() as f64;
            prop_assert!(e + 1e-9 >= nn);
        }
    }
}
