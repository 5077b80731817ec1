//! Reproducible bulk sample generation, splits and the benchmark file
//! format.

mod error;
pub mod format;
mod load;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::filter::{apply_conflict_rule, retain_emitters, ConflictRule, FilteredSample};
use crate::point::Point;
use crate::rng::{derive_retry_stream, derive_sample_stream};
use crate::sim::{
    simulate_acquisition, simulate_acquisition_traced, ConditionParams, DwellTrace, Emitter,
    LocalizationRecord, SimError,
};

pub use error::DatasetError;
pub use format::{
    fmt_coord, quantize_coord, DatasetManifest, FileDigest, FileKind, SplitSizes, FORMAT_VERSION,
    MANIFEST_FILE,
};
pub use load::{load_dataset, read_manifest, write_canonical_dump, LoadedDataset};

/// Retry cap per sample slot.
pub const MAX_RETRIES: u64 = 10_000;
/// Number of leading samples used to fix the output-set size.
pub const PILOT_SAMPLES: u64 = 1000;
pub const MIN_SAMPLES: u64 = 10;

const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split '{other}' (train, val, test)")),
        }
    }
}

/// One emitted sample. Coordinates are quantized to the on-disk precision
/// and `true_emitter_id` indexes into `ground_truth`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub sample_id: u64,
    pub ground_truth: Vec<Point>,
    pub localizations: Vec<LocalizationRecord>,
    /// Last observed frame.
    pub seq_len: u32,
}

impl Sample {
    pub fn from_filtered(sample_id: u64, fs: &FilteredSample) -> Self {
        let index: BTreeMap<u32, u32> = fs
            .retained_emitters
            .iter()
            .enumerate()
            .map(|(i, e)| (e.emitter_id, i as u32))
            .collect();
        let ground_truth = fs
            .retained_emitters
            .iter()
            .map(|e| Point::new(quantize_coord(e.x_nm), quantize_coord(e.y_nm)))
            .collect();
        let localizations: Vec<_> = fs
            .localizations
            .iter()
            .map(|r| LocalizationRecord {
                frame: r.frame,
                x_nm: quantize_coord(r.x_nm),
                y_nm: quantize_coord(r.y_nm),
                true_emitter_id: index[&r.true_emitter_id],
            })
            .collect();
        let seq_len = localizations.last().map_or(0, |r| r.frame);
        Self {
            sample_id,
            ground_truth,
            localizations,
            seq_len,
        }
    }

    pub fn observed_points(&self) -> Vec<Point> {
        self.localizations
            .iter()
            .map(|r| Point::new(r.x_nm, r.y_nm))
            .collect()
    }
}

/// How the ground-truth set size is controlled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizePolicy {
    /// Every sample has exactly this many retained emitters.
    Fixed(usize),
    /// Any nonzero number of retained emitters.
    Variable,
}

/// Simulate, filter and collect the retained emitters of one acquisition.
pub fn generate_sample<R: Rng + ?Sized>(
    params: &ConditionParams,
    rng: &mut R,
) -> Result<FilteredSample, SimError> {
    let (emitters, raw) = simulate_acquisition(params, rng)?;
    Ok(filter_and_retain(params, &emitters, &raw))
}

fn filter_and_retain(
    params: &ConditionParams,
    emitters: &[Emitter],
    raw: &[LocalizationRecord],
) -> FilteredSample {
    let (kept, dropped) = apply_conflict_rule(raw, ConflictRule::for_condition(params));
    retain_emitters(emitters, kept, dropped)
}

/// Removes randomly chosen retained emitters (with all of their raw
/// localizations) and re-filters until exactly `n_out` remain. Dropping
/// records never creates a conflict, so each round lowers the retained
/// count by at most one.
fn thin_to_size<R: Rng + ?Sized>(
    params: &ConditionParams,
    emitters: &[Emitter],
    mut raw: Vec<LocalizationRecord>,
    mut fs: FilteredSample,
    n_out: usize,
    rng: &mut R,
) -> FilteredSample {
    let mut removed = BTreeSet::new();
    while fs.retained_emitters.len() > n_out {
        let victim = fs.retained_emitters[rng.random_range(0..fs.retained_emitters.len())].emitter_id;
        removed.insert(victim);
        raw.retain(|r| r.true_emitter_id != victim);
        fs = filter_and_retain(params, emitters, &raw);
    }
    debug_assert_eq!(fs.retained_emitters.len(), n_out);
    fs
}

/// Outcome of filling one sample slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub sample: Sample,
    /// Index of the accepted attempt.
    pub retry: u64,
    /// Retained emitters before thinning.
    pub retained_before_thinning: usize,
}

/// Produces sample `sample_id`. Attempts use independent streams
/// `(master_seed, sample_id, retry)`; attempts with too few retained
/// emitters are discarded. When `trace` is given, the raw dwell draws of
/// the accepted attempt are appended to it.
pub fn generate_slot(
    params: &ConditionParams,
    master_seed: u64,
    sample_id: u64,
    policy: SizePolicy,
    mut trace: Option<&mut DwellTrace>,
) -> Result<SlotOutcome, DatasetError> {
    let needed = match policy {
        SizePolicy::Fixed(n) => n.max(1),
        SizePolicy::Variable => 1,
    };
    let mut observed = BTreeMap::new();
    for retry in 0..MAX_RETRIES {
        let mut rng = derive_retry_stream(master_seed, sample_id, retry);
        let mut local = DwellTrace::default();
        let (emitters, raw) = simulate_acquisition_traced(
            params,
            &mut rng,
            trace.is_some().then_some(&mut local),
        )?;
        let fs = filter_and_retain(params, &emitters, &raw);
        let retained = fs.retained_emitters.len();
        if retained < needed {
            *observed.entry(retained).or_insert(0) += 1;
            continue;
        }
        let fs = match policy {
            SizePolicy::Fixed(n) if retained > n => {
                thin_to_size(params, &emitters, raw, fs, n, &mut rng)
            }
            _ => fs,
        };
        if let Some(t) = trace.as_deref_mut() {
            t.on_draws.extend(local.on_draws);
            t.off_draws.extend(local.off_draws);
        }
        return Ok(SlotOutcome {
            sample: Sample::from_filtered(sample_id, &fs),
            retry,
            retained_before_thinning: retained,
        });
    }
    Err(DatasetError::NonConvergent {
        sample_id,
        n_out: needed,
        retries: MAX_RETRIES,
        observed,
    })
}

/// Output-set size: the smallest retained count among the first
/// `min(PILOT_SAMPLES, n_samples)` first-attempt samples, at least one.
pub fn resolve_n_out(
    params: &ConditionParams,
    master_seed: u64,
    n_samples: u64,
) -> Result<usize, DatasetError> {
    let pilot = n_samples.min(PILOT_SAMPLES);
    let counts: Vec<usize> = (0..pilot)
        .into_par_iter()
        .map(|id| {
            generate_sample(params, &mut derive_sample_stream(master_seed, id))
                .map(|fs| fs.retained_emitters.len())
        })
        .collect::<Result<_, _>>()?;
    Ok(counts.into_iter().min().unwrap_or(0).max(1))
}

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub n_samples: u64,
    pub master_seed: u64,
    /// Reject/thin to a fixed ground-truth size (the default).
    pub fixed_n: bool,
    /// Worker threads; `None` uses the available parallelism.
    pub threads: Option<usize>,
}

/// Checks everything that can be checked before touching the filesystem.
pub fn validate_request(params: &ConditionParams, n_samples: u64) -> Result<(), DatasetError> {
    if n_samples < MIN_SAMPLES {
        return Err(DatasetError::InvalidArgument(format!(
            "at least {MIN_SAMPLES} samples are required, got {n_samples}"
        )));
    }
    params.validate()?;
    params.check_regime()?;
    Ok(())
}

struct SplitFiles {
    locs: HashingWriter,
    truth: HashingWriter,
    prov: HashingWriter,
}

type HashingWriter = format::HashingWriter<BufWriter<File>>;

fn create(dir: &Path, name: &str) -> Result<HashingWriter, DatasetError> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| DatasetError::io(&path, e))?;
    Ok(format::HashingWriter::new(BufWriter::new(file)))
}

/// Generates `n_samples` samples of `params` into `out_dir` and writes the
/// manifest. Output bytes depend only on `(params, master_seed, n_samples,
/// fixed_n)`.
pub fn generate_dataset(
    params: &ConditionParams,
    opts: &GenerateOptions,
    out_dir: &Path,
) -> Result<DatasetManifest, DatasetError> {
    validate_request(params, opts.n_samples)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = opts.threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| DatasetError::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| write_dataset(params, opts, out_dir))
}

fn write_dataset(
    params: &ConditionParams,
    opts: &GenerateOptions,
    out_dir: &Path,
) -> Result<DatasetManifest, DatasetError> {
    let n_out = resolve_n_out(params, opts.master_seed, opts.n_samples)?;
    let policy = if opts.fixed_n {
        SizePolicy::Fixed(n_out)
    } else {
        SizePolicy::Variable
    };
    let splits = SplitSizes::for_samples(opts.n_samples);

    fs::create_dir_all(out_dir).map_err(|e| DatasetError::io(out_dir, e))?;
    let mut files = BTreeMap::new();
    for split in Split::ALL {
        let open = |kind: FileKind| -> Result<HashingWriter, DatasetError> {
            let mut w = create(out_dir, &kind.file_name(split))?;
            writeln!(w, "{}", kind.header()).map_err(|e| DatasetError::io(out_dir, e))?;
            Ok(w)
        };
        files.insert(
            split,
            SplitFiles {
                locs: open(FileKind::Localizations)?,
                truth: open(FileKind::GroundTruth)?,
                prov: open(FileKind::Provenance)?,
            },
        );
    }

    let mut max_seq_len = 0;
    let ids: Vec<u64> = (0..opts.n_samples).collect();
    for chunk in ids.chunks(CHUNK) {
        let samples: Vec<Sample> = chunk
            .par_iter()
            .map(|&id| generate_slot(params, opts.master_seed, id, policy, None).map(|o| o.sample))
            .collect::<Result<_, _>>()?;
        for sample in &samples {
            max_seq_len = max_seq_len.max(sample.seq_len);
            let split = splits.split_of(sample.sample_id).expect("id in range");
            let f = files.get_mut(&split).expect("all splits open");
            format::write_sample_rows(sample, &mut f.locs, &mut f.truth, &mut f.prov)
                .map_err(|e| DatasetError::io(out_dir, e))?;
        }
    }

    let mut digests = Vec::new();
    for (split, f) in files {
        for (kind, w) in [
            (FileKind::Localizations, f.locs),
            (FileKind::GroundTruth, f.truth),
            (FileKind::Provenance, f.prov),
        ] {
            let name = kind.file_name(split);
            let (_, sha256) = w.finish().map_err(|e| DatasetError::io(out_dir.join(&name), e))?;
            digests.push(FileDigest { name, sha256 });
        }
    }
    digests.sort_by(|a, b| a.name.cmp(&b.name));

    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        condition: params.id.clone(),
        master_seed: opts.master_seed,
        n_samples: opts.n_samples,
        splits,
        n_out,
        max_seq_len,
        sigma_loc_nm: params.sigma_loc_nm,
        filter_radius_nm: params.filter_radius_nm,
        files: digests,
    };
    let path = out_dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| DatasetError::io(&path, e))?;
    Ok(manifest)
}
