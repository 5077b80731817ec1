//! Same-frame detection-limit filter and retained-emitter bookkeeping.

use std::collections::BTreeSet;

use crate::sim::{ConditionParams, Emitter, LocalizationRecord, Roi};

/// Ground truth and observations after detection filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredSample {
    pub retained_emitters: Vec<Emitter>,
    pub localizations: Vec<LocalizationRecord>,
    pub dropped_count: usize,
    pub raw_emitter_count: usize,
}

/// When two same-frame localizations count as unresolvable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConflictRule {
    /// Euclidean distance at most this radius (nm).
    Radius(f64),
    /// The whole field of view is a single resolution cell: any two
    /// localizations in one frame conflict.
    WholeFrame,
}

impl ConflictRule {
    /// A field of view that fits inside the resolvability radius along both
    /// axes is one resolution cell; otherwise conflicts are pairwise.
    pub fn for_field(roi: &Roi, radius_nm: f64) -> Self {
        if roi.width_nm.max(roi.height_nm) <= radius_nm {
            ConflictRule::WholeFrame
        } else {
            ConflictRule::Radius(radius_nm)
        }
    }

    pub fn for_condition(params: &ConditionParams) -> Self {
        Self::for_field(&params.roi, params.filter_radius_nm)
    }
}

/// Applies `rule` frame by frame, dropping every conflicting localization.
pub fn apply_conflict_rule(
    records: &[LocalizationRecord],
    rule: ConflictRule,
) -> (Vec<LocalizationRecord>, usize) {
    match rule {
        ConflictRule::Radius(r) => apply_detection_filter(records, r),
        ConflictRule::WholeFrame => {
            debug_assert!(records.windows(2).all(|w| w[0].frame <= w[1].frame));
            let kept: Vec<_> = records
                .chunk_by(|a, b| a.frame == b.frame)
                .filter(|f| f.len() == 1)
                .map(|f| f[0])
                .collect();
            let dropped = records.len() - kept.len();
            (kept, dropped)
        }
    }
}

/// Removes every localization that has another localization of the same
/// frame within `radius_nm` (inclusive). All members of a conflicting group
/// are dropped. Input must be sorted by frame; output keeps input order.
pub fn apply_detection_filter(
    records: &[LocalizationRecord],
    radius_nm: f64,
) -> (Vec<LocalizationRecord>, usize) {
    debug_assert!(records.windows(2).all(|w| w[0].frame <= w[1].frame));
    let r2 = radius_nm * radius_nm;
    let mut kept = Vec::with_capacity(records.len());
    for frame in records.chunk_by(|a, b| a.frame == b.frame) {
        if frame.len() == 1 {
            kept.push(frame[0]);
            continue;
        }
        let mut conflict = vec![false; frame.len()];
        for i in 0..frame.len() {
            for j in i + 1..frame.len() {
                let dx = frame[i].x_nm - frame[j].x_nm;
                let dy = frame[i].y_nm - frame[j].y_nm;
                if dx * dx + dy * dy <= r2 {
                    conflict[i] = true;
                    conflict[j] = true;
                }
            }
        }
        kept.extend(
            frame
                .iter()
                .zip(&conflict)
                .filter(|(_, &c)| !c)
                .map(|(r, _)| *r),
        );
    }
    let dropped = records.len() - kept.len();
    (kept, dropped)
}

/// Keeps the emitters that still have at least one localization.
pub fn retain_emitters(
    emitters: &[Emitter],
    kept: Vec<LocalizationRecord>,
    dropped_count: usize,
) -> FilteredSample {
    let seen: BTreeSet<u32> = kept.iter().map(|r| r.true_emitter_id).collect();
    debug_assert!(seen
        .iter()
        .all(|id| emitters.iter().any(|e| e.emitter_id == *id)));
    let retained_emitters = emitters
        .iter()
        .filter(|e| seen.contains(&e.emitter_id))
        .copied()
        .collect();
    FilteredSample {
        retained_emitters,
        localizations: kept,
        dropped_count,
        raw_emitter_count: emitters.len(),
    }
}
