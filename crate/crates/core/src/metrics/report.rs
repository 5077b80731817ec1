//! Batch evaluation over a dataset split: per-sample metric table and
//! summary statistics.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::metrics::{chamfer_distance, detection_report, hungarian_assignment, MetricsError};
use crate::point::Point;

pub const SAMPLE_TABLE_HEADER: &str = "sample_id,chamfer_nm,hungarian_nm,tp,fp,fn,rmse_tp_nm";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleMetrics {
    pub sample_id: u64,
    pub n_truth: usize,
    pub n_pred: usize,
    pub chamfer_nm: f64,
    pub hungarian_nm: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub detection_accuracy: f64,
    pub rmse_tp_nm: Option<f64>,
}

pub fn evaluate_sample(
    sample_id: u64,
    pred: &[Point],
    truth: &[Point],
    tau_nm: f64,
) -> Result<SampleMetrics, MetricsError> {
    let chamfer_nm = chamfer_distance(pred, truth)?;
    let assignment = hungarian_assignment(pred, truth)?;
    let det = detection_report(pred, truth, tau_nm)?;
    Ok(SampleMetrics {
        sample_id,
        n_truth: truth.len(),
        n_pred: pred.len(),
        chamfer_nm,
        hungarian_nm: assignment.total_cost_nm / assignment.pairs.len() as f64,
        tp: det.tp,
        fp: det.fp,
        fn_: det.fn_,
        detection_accuracy: det.detection_accuracy,
        rmse_tp_nm: det.rmse_tp_nm,
    })
}

/// Evaluates `(sample_id, pred, truth)` triples in parallel; output keeps
/// input order.
pub fn evaluate_all(
    items: &[(u64, &[Point], &[Point])],
    tau_nm: f64,
) -> Result<Vec<SampleMetrics>, MetricsError> {
    items
        .par_iter()
        .map(|&(id, pred, truth)| evaluate_sample(id, pred, truth, tau_nm))
        .collect()
}

/// Pairwise summation: fixed association order independent of threading.
fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1..=8 => values.iter().sum(),
        n => pairwise_sum(&values[..n / 2]) + pairwise_sum(&values[n / 2..]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for one value.
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = pairwise_sum(values) / n as f64;
        let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let std = if n > 1 {
            (pairwise_sum(&dev) / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitSummary {
    pub n_samples: usize,
    pub chamfer_nm: Option<MeanStd>,
    pub hungarian_error_nm: Option<MeanStd>,
    pub tp: Option<MeanStd>,
    pub fp: Option<MeanStd>,
    #[serde(rename = "fn")]
    pub fn_: Option<MeanStd>,
    /// Present only when every sample has `fp == fn`.
    pub fp_fn: Option<MeanStd>,
    pub detection_accuracy: Option<MeanStd>,
    /// Over samples with at least one true positive.
    pub rmse_tp_nm: Option<MeanStd>,
}

impl SplitSummary {
    pub fn from_rows(rows: &[SampleMetrics]) -> Self {
        let col = |f: &dyn Fn(&SampleMetrics) -> f64| -> Vec<f64> { rows.iter().map(f).collect() };
        let fp = col(&|r| r.fp as f64);
        let balanced = rows.iter().all(|r| r.fp == r.fn_);
        let rmse: Vec<f64> = rows.iter().filter_map(|r| r.rmse_tp_nm).collect();
        Self {
            n_samples: rows.len(),
            chamfer_nm: MeanStd::of(&col(&|r| r.chamfer_nm)),
            hungarian_error_nm: MeanStd::of(&col(&|r| r.hungarian_nm)),
            tp: MeanStd::of(&col(&|r| r.tp as f64)),
            fp: MeanStd::of(&fp),
            fn_: MeanStd::of(&col(&|r| r.fn_ as f64)),
            fp_fn: if balanced { MeanStd::of(&fp) } else { None },
            detection_accuracy: MeanStd::of(&col(&|r| r.detection_accuracy)),
            rmse_tp_nm: MeanStd::of(&rmse),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub tau_nm: f64,
    pub splits: std::collections::BTreeMap<String, SplitSummary>,
}

pub fn write_sample_table<W: Write>(rows: &[SampleMetrics], mut w: W) -> io::Result<()> {
    writeln!(w, "{SAMPLE_TABLE_HEADER}")?;
    for r in rows {
        let rmse = r.rmse_tp_nm.map(|v| format!("{v:.6}")).unwrap_or_default();
        writeln!(
            w,
            "{},{:.6},{:.6},{},{},{},{}",
            r.sample_id, r.chamfer_nm, r.hungarian_nm, r.tp, r.fp, r.fn_, rmse
        )?;
    }
    Ok(())
}
