//! Descriptive statistics of a generated dataset.
//!
//! Observed statistics come straight from the files. Dwell-time means are
//! obtained by replaying the generator from the manifest (condition label,
//! seed, output size): the observed runs are censored by the detection
//! filter, photobleaching and the acquisition end, so only the replayed
//! draws estimate the underlying means without bias.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{generate_slot, DatasetError, LoadedDataset, Sample, SizePolicy};
use crate::metrics::report::MeanStd;
use crate::registry::resolve_label;
use crate::sim::DwellTrace;

pub const SEQ_LEN_BIN: u32 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub condition: String,
    pub n_samples: usize,
    /// `"fixed"` or `"variable"`, as detected during replay.
    pub size_mode: &'static str,
    pub simulated_on_dwell: Option<MeanStd>,
    pub simulated_off_dwell: Option<MeanStd>,
    /// Mean length of runs of consecutive observed frames per emitter.
    pub observed_on_run: Option<MeanStd>,
    /// Mean number of empty frames between consecutive runs of one emitter.
    pub observed_off_gap: Option<MeanStd>,
    pub localizations_per_emitter: Option<MeanStd>,
    pub retained_histogram: BTreeMap<usize, u64>,
    /// Keyed by the lower edge of each `SEQ_LEN_BIN`-frame bin.
    pub seq_len_histogram: BTreeMap<u32, u64>,
}

fn runs_and_gaps(sample: &Sample, runs: &mut Vec<f64>, gaps: &mut Vec<f64>) {
    let mut frames: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for r in &sample.localizations {
        frames.entry(r.true_emitter_id).or_default().push(r.frame);
    }
    for fs in frames.values() {
        let mut start = fs[0];
        for w in fs.windows(2) {
            if w[1] != w[0] + 1 {
                runs.push(f64::from(w[0] - start + 1));
                gaps.push(f64::from(w[1] - w[0] - 1));
                start = w[1];
            }
        }
        runs.push(f64::from(fs[fs.len() - 1] - start + 1));
    }
}

fn replay(
    ds: &LoadedDataset,
    policy: SizePolicy,
    sample: &Sample,
    trace: Option<&mut DwellTrace>,
) -> Result<bool, DatasetError> {
    let params = resolve_label(&ds.manifest.condition)?;
    let o = generate_slot(&params, ds.manifest.master_seed, sample.sample_id, policy, trace)?;
    Ok(o.sample == *sample)
}

pub fn compute_stats(ds: &LoadedDataset) -> Result<DatasetStats, DatasetError> {
    let manifest = &ds.manifest;
    let params = resolve_label(&manifest.condition)?;
    let first = ds.iter().next().ok_or_else(|| DatasetError::Manifest {
        path: ds.root.clone(),
        message: "dataset has no samples".into(),
    })?;
    let fixed = SizePolicy::Fixed(manifest.n_out);
    let (policy, size_mode) = if replay(ds, fixed, first, None)? {
        (fixed, "fixed")
    } else if replay(ds, SizePolicy::Variable, first, None)? {
        (SizePolicy::Variable, "variable")
    } else {
        return Err(DatasetError::Manifest {
            path: ds.root.clone(),
            message: "sample 0 cannot be reproduced from the manifest".into(),
        });
    };

    let samples: Vec<&Sample> = ds.iter().collect();
    let traces: Vec<DwellTrace> = samples
        .par_iter()
        .map(|s| {
            let mut t = DwellTrace::default();
            let o = generate_slot(&params, manifest.master_seed, s.sample_id, policy, Some(&mut t))?;
            if o.sample != **s {
                return Err(DatasetError::Manifest {
                    path: ds.root.clone(),
                    message: format!("sample {} cannot be reproduced from the manifest", s.sample_id),
                });
            }
            Ok(t)
        })
        .collect::<Result<_, _>>()?;
    let on: Vec<f64> = traces.iter().flat_map(|t| t.on_draws.iter().copied()).collect();
    let off: Vec<f64> = traces.iter().flat_map(|t| t.off_draws.iter().copied()).collect();

    let mut runs = Vec::new();
    let mut gaps = Vec::new();
    let mut per_emitter = Vec::new();
    let mut retained_histogram = BTreeMap::new();
    let mut seq_len_histogram = BTreeMap::new();
    for s in &samples {
        runs_and_gaps(s, &mut runs, &mut gaps);
        let mut counts = vec![0u64; s.ground_truth.len()];
        for r in &s.localizations {
            counts[r.true_emitter_id as usize] += 1;
        }
        per_emitter.extend(counts.into_iter().map(|c| c as f64));
        *retained_histogram.entry(s.ground_truth.len()).or_insert(0) += 1;
        *seq_len_histogram
            .entry(s.seq_len / SEQ_LEN_BIN * SEQ_LEN_BIN)
            .or_insert(0) += 1;
    }

    Ok(DatasetStats {
        condition: manifest.condition.clone(),
        n_samples: samples.len(),
        size_mode,
        simulated_on_dwell: MeanStd::of(&on),
        simulated_off_dwell: MeanStd::of(&off),
        observed_on_run: MeanStd::of(&runs),
        observed_off_gap: MeanStd::of(&gaps),
        localizations_per_emitter: MeanStd::of(&per_emitter),
        retained_histogram,
        seq_len_histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::Point;
    use crate::sim::LocalizationRecord;

    #[test]
    fn run_and_gap_extraction() {
        let rec = |frame, id| LocalizationRecord {
            frame,
            x_nm: 0.0,
            y_nm: 0.0,
            true_emitter_id: id,
        };
        let s = Sample {
            sample_id: 0,
            ground_truth: vec![Point::default(); 2],
            localizations: vec![rec(1, 0), rec(2, 0), rec(3, 1), rec(6, 0), rec(7, 1), rec(8, 1)],
            seq_len: 8,
        };
        let (mut runs, mut gaps) = (vec![], vec![]);
        runs_and_gaps(&s, &mut runs, &mut gaps);
        // emitter 0: [1,2] gap 3 [6]; emitter 1: [3] gap 3 [7,8]
        assert_eq!(runs, vec![2.0, 1.0, 1.0, 2.0]);
        assert_eq!(gaps, vec![3.0, 3.0]);
    }
}
