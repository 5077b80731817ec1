//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 data or integrity error,
//! 4 excluded simulation regime.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::baseline::{cluster_predict, BaselineConfig};
use crate::dataset::{
    fmt_coord, generate_dataset, load_dataset, validate_request, write_canonical_dump,
    DatasetError, GenerateOptions, LoadedDataset, Split, MANIFEST_FILE,
};
use crate::metrics::report::{evaluate_all, write_sample_table, EvaluationReport, SplitSummary};
use crate::metrics::{select_examples, SelectionMode, DEFAULT_TAU_NM};
use crate::point::Point;
use crate::registry::{resolve_with, Overrides, RegistryError};
use crate::sim::SimError;
use crate::stats::compute_stats;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_EXCLUDED: i32 = 4;

pub const PREDICTIONS_HEADER: &str = "sample_id,x_nm,y_nm";
pub const LOSSES_HEADER: &str = "sample_id,loss";

#[derive(Debug, Parser)]
#[command(name = "smlm", version, about = "SMLM sequence-to-set benchmark simulator and evaluator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a condition and write a dataset directory.
    Generate(GenerateArgs),
    /// Score a predictions CSV against one split of a dataset.
    Evaluate(EvaluateArgs),
    /// Print dwell-time, localization and size statistics of a dataset.
    Stats(StatsArgs),
    /// Pick median / easy / hard samples from per-sample losses.
    SelectExamples(SelectArgs),
    /// Write k-means baseline predictions for one split.
    Baseline(BaselineArgs),
    /// Write the canonical text dump of a dataset.
    Dump(DumpArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Registry condition id (D1-D6, P1-P4).
    #[arg(long)]
    pub condition: String,
    #[arg(long)]
    pub samples: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep every sample's natural retained-emitter count.
    #[arg(long)]
    pub variable_n: bool,
    /// Worker threads (default: available parallelism). Output does not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub density_override: Option<f64>,
    #[arg(long)]
    pub mu_off_override: Option<f64>,
    #[arg(long)]
    pub sigma_override: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// CSV with header `sample_id,x_nm,y_nm`.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: Split,
    #[arg(long, default_value_t = DEFAULT_TAU_NM)]
    pub tau: f64,
    /// Report directory (default: the dataset directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// CSV with header `sample_id,loss`, losses already averaged across models.
    #[arg(long)]
    pub losses: PathBuf,
    #[arg(long)]
    pub mode: SelectionMode,
    /// Directory for the selected samples (default: the dataset directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: Split,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Excluded(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Excluded(_) => EXIT_EXCLUDED,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Excluded(m) => m,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        let msg = e.to_string();
        match e {
            DatasetError::Sim(SimError::ExcludedRegime { .. })
            | DatasetError::Registry(RegistryError::Params(SimError::ExcludedRegime { .. })) => {
                CliError::Excluded(msg)
            }
            DatasetError::InvalidArgument(_)
            | DatasetError::Registry(_)
            | DatasetError::Sim(SimError::InvalidParams(_)) => CliError::Usage(msg),
            _ => CliError::Data(msg),
        }
    }
}

fn data_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if code == EXIT_OK {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(&a, out),
        Command::Evaluate(a) => cmd_evaluate(&a, out),
        Command::Stats(a) => cmd_stats(&a, out),
        Command::SelectExamples(a) => cmd_select_examples(&a, out),
        Command::Baseline(a) => cmd_baseline(&a, out),
        Command::Dump(a) => cmd_dump(&a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.exit_code()
        }
    }
}

fn io_out(e: std::io::Error) -> CliError {
    CliError::Data(format!("writing output: {e}"))
}

pub fn cmd_generate(a: &GenerateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let overrides = Overrides {
        density_per_um2: a.density_override,
        mu_off_frames: a.mu_off_override,
        sigma_loc_nm: a.sigma_override,
    };
    let params = resolve_with(&a.condition, &overrides).map_err(DatasetError::from)?;
    if a.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    validate_request(&params, a.samples)?;
    let opts = GenerateOptions {
        n_samples: a.samples,
        master_seed: a.seed,
        fixed_n: !a.variable_n,
        threads: a.threads,
    };
    let manifest = generate_dataset(&params, &opts, &a.out)?;
    writeln!(out, "manifest: {}", a.out.join(MANIFEST_FILE).display()).map_err(io_out)?;
    writeln!(out, "n_out: {}", manifest.n_out).map_err(io_out)?;
    writeln!(
        out,
        "splits: train={} val={} test={}",
        manifest.splits.train, manifest.splits.val, manifest.splits.test
    )
    .map_err(io_out)?;
    Ok(())
}

/// Reads a `sample_id,x_nm,y_nm` predictions file grouped by sample.
pub fn read_predictions(path: &Path) -> Result<BTreeMap<u64, Vec<Point>>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| data_err(path, e))?;
    let header = rdr.headers().map_err(|e| data_err(path, e))?.clone();
    if header.iter().collect::<Vec<_>>().join(",") != PREDICTIONS_HEADER {
        return Err(data_err(path, format!("expected header '{PREDICTIONS_HEADER}'")));
    }
    let mut preds: BTreeMap<u64, Vec<Point>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| data_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let parse_err = |what: &str| data_err(path, format!("line {line}: invalid {what}"));
        let id: u64 = field(0).parse().map_err(|_| parse_err("sample_id"))?;
        let x: f64 = field(1).parse().map_err(|_| parse_err("x_nm"))?;
        let y: f64 = field(2).parse().map_err(|_| parse_err("y_nm"))?;
        if !(x.is_finite() && y.is_finite()) {
            return Err(parse_err("coordinate"));
        }
        preds.entry(id).or_default().push(Point::new(x, y));
    }
    Ok(preds)
}

pub fn write_predictions<W: Write>(
    preds: &[(u64, Vec<Point>)],
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "{PREDICTIONS_HEADER}")?;
    for (id, pts) in preds {
        for p in pts {
            writeln!(w, "{id},{},{}", fmt_coord(p.x_nm), fmt_coord(p.y_nm))?;
        }
    }
    w.flush()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| data_err(path, e))
}

pub fn cmd_evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(a.tau > 0.0 && a.tau.is_finite()) {
        return Err(CliError::Usage(format!("--tau must be positive, got {}", a.tau)));
    }
    let ds = load_dataset(&a.dataset)?;
    let preds = read_predictions(&a.pred)?;
    let samples = ds.split(a.split);
    let n_out = ds.manifest.n_out;

    let missing: Vec<u64> = samples
        .iter()
        .map(|s| s.sample_id)
        .filter(|id| !preds.contains_key(id))
        .collect();
    if !missing.is_empty() {
        let first: Vec<String> = missing.iter().take(10).map(u64::to_string).collect();
        return Err(CliError::Data(format!(
            "predictions missing for {} sample(s) of split {}; first: {}",
            missing.len(),
            a.split,
            first.join(", ")
        )));
    }
    if let Some(s) = samples.iter().find(|s| preds[&s.sample_id].len() != n_out) {
        return Err(CliError::Data(format!(
            "sample {} has {} predicted rows, expected n_out = {n_out}",
            s.sample_id,
            preds[&s.sample_id].len()
        )));
    }

    let items: Vec<(u64, &[Point], &[Point])> = samples
        .iter()
        .map(|s| {
            (
                s.sample_id,
                preds[&s.sample_id].as_slice(),
                s.ground_truth.as_slice(),
            )
        })
        .collect();
    let rows = evaluate_all(&items, a.tau).map_err(|e| CliError::Data(e.to_string()))?;
    let summary = SplitSummary::from_rows(&rows);
    let report = EvaluationReport {
        tau_nm: a.tau,
        splits: BTreeMap::from([(a.split.name().to_string(), summary.clone())]),
    };

    let dir = a.out.clone().unwrap_or_else(|| a.dataset.clone());
    fs::create_dir_all(&dir).map_err(|e| data_err(&dir, e))?;
    let json_path = dir.join(format!("evaluation.{}.json", a.split));
    let csv_path = dir.join(format!("evaluation.{}.samples.csv", a.split));
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    write_file(&json_path, json.as_bytes())?;
    let mut table = Vec::new();
    write_sample_table(&rows, &mut table).map_err(io_out)?;
    write_file(&csv_path, &table)?;

    let show = |m: Option<crate::metrics::report::MeanStd>| {
        m.map_or("n/a".to_string(), |m| format!("{:.4} ± {:.4}", m.mean, m.std))
    };
    writeln!(out, "split: {} ({} samples, tau = {} nm)", a.split, rows.len(), a.tau).map_err(io_out)?;
    writeln!(out, "chamfer_nm: {}", show(summary.chamfer_nm)).map_err(io_out)?;
    writeln!(out, "hungarian_error_nm: {}", show(summary.hungarian_error_nm)).map_err(io_out)?;
    writeln!(out, "tp: {}", show(summary.tp)).map_err(io_out)?;
    writeln!(out, "fp_fn: {}", show(summary.fp_fn)).map_err(io_out)?;
    writeln!(out, "detection_accuracy: {}", show(summary.detection_accuracy)).map_err(io_out)?;
    writeln!(out, "rmse_tp_nm: {}", show(summary.rmse_tp_nm)).map_err(io_out)?;
    writeln!(out, "report: {}", json_path.display()).map_err(io_out)?;
    writeln!(out, "samples: {}", csv_path.display()).map_err(io_out)?;
    Ok(())
}

fn require_dataset(dir: &Path) -> Result<LoadedDataset, CliError> {
    if !dir.join(MANIFEST_FILE).is_file() {
        return Err(CliError::Data(format!(
            "{} is not a dataset directory (no {MANIFEST_FILE})",
            dir.display()
        )));
    }
    Ok(load_dataset(dir)?)
}

pub fn cmd_stats(a: &StatsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let ds = require_dataset(&a.dataset)?;
    let stats = compute_stats(&ds)?;
    if a.json {
        let text = serde_json::to_string_pretty(&stats).expect("stats serialize");
        writeln!(out, "{text}").map_err(io_out)?;
        return Ok(());
    }
    let show = |m: Option<crate::metrics::report::MeanStd>| {
        m.map_or("n/a".to_string(), |m| format!("{:.4} ± {:.4} (n = {})", m.mean, m.std, m.n))
    };
    let w = out;
    writeln!(w, "condition: {} ({} samples, {} size)", stats.condition, stats.n_samples, stats.size_mode).map_err(io_out)?;
    writeln!(w, "mean on-time (frames): {}", show(stats.simulated_on_dwell)).map_err(io_out)?;
    writeln!(w, "mean off-time (frames): {}", show(stats.simulated_off_dwell)).map_err(io_out)?;
    writeln!(w, "observed on-run length (frames): {}", show(stats.observed_on_run)).map_err(io_out)?;
    writeln!(w, "observed off-gap length (frames): {}", show(stats.observed_off_gap)).map_err(io_out)?;
    writeln!(w, "localizations per emitter: {}", show(stats.localizations_per_emitter)).map_err(io_out)?;
    writeln!(w, "retained emitters:").map_err(io_out)?;
    for (k, v) in &stats.retained_histogram {
        writeln!(w, "  {k:>4}: {v}").map_err(io_out)?;
    }
    writeln!(w, "sequence length:").map_err(io_out)?;
    for (k, v) in &stats.seq_len_histogram {
        writeln!(w, "  [{k}, {}): {v}", k + crate::stats::SEQ_LEN_BIN).map_err(io_out)?;
    }
    Ok(())
}

/// Reads a `sample_id,loss` file in row order.
pub fn read_losses(path: &Path) -> Result<Vec<(u64, f64)>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| data_err(path, e))?;
    let header = rdr.headers().map_err(|e| data_err(path, e))?.clone();
    if header.iter().collect::<Vec<_>>().join(",") != LOSSES_HEADER {
        return Err(data_err(path, format!("expected header '{LOSSES_HEADER}'")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| data_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let id: u64 = rec
            .get(0)
            .unwrap_or_default()
            .parse()
            .map_err(|_| data_err(path, format!("line {line}: invalid sample_id")))?;
        let loss: f64 = rec
            .get(1)
            .unwrap_or_default()
            .parse()
            .map_err(|_| data_err(path, format!("line {line}: invalid loss")))?;
        rows.push((id, loss));
    }
    Ok(rows)
}

pub fn cmd_select_examples(a: &SelectArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let ds = require_dataset(&a.dataset)?;
    let rows = read_losses(&a.losses)?;
    let losses: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let picked = select_examples(&losses, a.mode).map_err(|e| CliError::Data(e.to_string()))?;
    let ids: Vec<u64> = picked.iter().map(|&i| rows[i].0).collect();
    if let Some(id) = ids.iter().find(|&&id| ds.get(id).is_none()) {
        return Err(CliError::Data(format!("sample {id} is not in the dataset")));
    }

    let mode = format!("{:?}", a.mode).to_lowercase();
    let dir = a.out.clone().unwrap_or_else(|| a.dataset.clone());
    fs::create_dir_all(&dir).map_err(|e| data_err(&dir, e))?;
    let loc_path = dir.join(format!("examples.{mode}.localizations.csv"));
    let gt_path = dir.join(format!("examples.{mode}.ground_truth.csv"));
    let mut locs = String::from("sample_id,frame,x_nm,y_nm,true_emitter_idx\n");
    let mut truth = String::from("sample_id,emitter_idx,x_nm,y_nm\n");
    for &id in &ids {
        let s = ds.get(id).expect("checked");
        for r in &s.localizations {
            locs.push_str(&format!(
                "{id},{},{},{},{}\n",
                r.frame,
                fmt_coord(r.x_nm),
                fmt_coord(r.y_nm),
                r.true_emitter_id
            ));
        }
        for (i, p) in s.ground_truth.iter().enumerate() {
            truth.push_str(&format!("{id},{i},{},{}\n", fmt_coord(p.x_nm), fmt_coord(p.y_nm)));
        }
    }
    write_file(&loc_path, locs.as_bytes())?;
    write_file(&gt_path, truth.as_bytes())?;

    writeln!(out, "mode: {mode}").map_err(io_out)?;
    writeln!(out, "selected: {}", ids.len()).map_err(io_out)?;
    for id in &ids {
        writeln!(out, "{id}").map_err(io_out)?;
    }
    Ok(())
}

/// Baseline predictions for every sample of `split`, in sample order.
pub fn baseline_predictions(
    ds: &LoadedDataset,
    split: Split,
    seed: u64,
    restarts: usize,
    max_iters: usize,
) -> Result<Vec<(u64, Vec<Point>)>, CliError> {
    let n_out = ds.manifest.n_out;
    ds.split(split)
        .par_iter()
        .map(|s| {
            let cfg = BaselineConfig {
                n_out,
                n_restarts: restarts,
                max_iters,
                seed: seed.wrapping_add(s.sample_id),
            };
            cluster_predict(&s.localizations, &cfg)
                .map(|p| (s.sample_id, p))
                .map_err(|e| CliError::Data(format!("sample {}: {e}", s.sample_id)))
        })
        .collect()
}

pub fn cmd_baseline(a: &BaselineArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.restarts == 0 || a.max_iters == 0 {
        return Err(CliError::Usage("--restarts and --max-iters must be positive".into()));
    }
    let ds = require_dataset(&a.dataset)?;
    let preds = baseline_predictions(&ds, a.split, a.seed, a.restarts, a.max_iters)?;
    let file = File::create(&a.out).map_err(|e| data_err(&a.out, e))?;
    write_predictions(&preds, BufWriter::new(file)).map_err(|e| data_err(&a.out, e))?;
    let ids: BTreeSet<u64> = preds.iter().map(|p| p.0).collect();
    writeln!(
        out,
        "wrote {} predictions for {} samples to {}",
        preds.iter().map(|p| p.1.len()).sum::<usize>(),
        ids.len(),
        a.out.display()
    )
    .map_err(io_out)?;
    Ok(())
}

pub fn cmd_dump(a: &DumpArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let ds = require_dataset(&a.dataset)?;
    match &a.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| data_err(path, e))?;
            let mut w = BufWriter::new(file);
            write_canonical_dump(&ds, &mut w).map_err(|e| data_err(path, e))?;
            w.flush().map_err(|e| data_err(path, e))
        }
        None => write_canonical_dump(&ds, out).map_err(io_out),
    }
}
