//! On-disk layout: `manifest.json` plus three CSV files per split.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{Sample, Split};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOCALIZATIONS_HEADER: &str = "sample_id,frame,x_nm,y_nm";
pub const GROUND_TRUTH_HEADER: &str = "sample_id,emitter_idx,x_nm,y_nm";
pub const PROVENANCE_HEADER: &str = "sample_id,frame,true_emitter_idx";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Localizations,
    GroundTruth,
    Provenance,
}

impl FileKind {
    pub const ALL: [FileKind; 3] = [Self::Localizations, Self::GroundTruth, Self::Provenance];

    pub fn file_name(self, split: Split) -> String {
        let suffix = match self {
            Self::Localizations => "localizations",
            Self::GroundTruth => "ground_truth",
            Self::Provenance => "provenance",
        };
        format!("{}.{suffix}.csv", split.name())
    }

    pub fn header(self) -> &'static str {
        match self {
            Self::Localizations => LOCALIZATIONS_HEADER,
            Self::GroundTruth => GROUND_TRUTH_HEADER,
            Self::Provenance => PROVENANCE_HEADER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: u64,
    pub val: u64,
    pub test: u64,
}

impl SplitSizes {
    /// 80/10/10, with any remainder going to the test split.
    pub fn for_samples(n: u64) -> Self {
        let train = n * 8 / 10;
        let val = n / 10;
        Self {
            train,
            val,
            test: n - train - val,
        }
    }

    pub fn total(&self) -> u64 {
        self.train + self.val + self.test
    }

    /// Contiguous id range of a split.
    pub fn range(&self, split: Split) -> std::ops::Range<u64> {
        match split {
            Split::Train => 0..self.train,
            Split::Val => self.train..self.train + self.val,
            Split::Test => self.train + self.val..self.total(),
        }
    }

    pub fn split_of(&self, sample_id: u64) -> Option<Split> {
        Split::ALL
            .into_iter()
            .find(|&s| self.range(s).contains(&sample_id))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    /// Condition label, e.g. `D2` or `D2+density=4+sigma=0`.
    pub condition: String,
    pub master_seed: u64,
    pub n_samples: u64,
    pub splits: SplitSizes,
    pub n_out: usize,
    pub max_seq_len: u32,
    pub sigma_loc_nm: f64,
    pub filter_radius_nm: f64,
    pub files: Vec<FileDigest>,
}

/// Fixed-point text with four decimals; negative zero is written as zero.
pub fn fmt_coord(v: f64) -> String {
    let s = format!("{v:.4}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// The value a coordinate takes after a write/read cycle.
pub fn quantize_coord(v: f64) -> f64 {
    fmt_coord(v).parse().expect("formatted float parses")
}

/// Writer that hashes everything passing through it.
pub struct HashingWriter<W> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> HashingWriter<W> {
    pub fn new(inner: W) -> Self {
        Self {
            inner,
            hasher: Sha256::new(),
        }
    }

    /// Flushes and returns the inner writer with the hex digest.
    pub fn finish(mut self) -> io::Result<(W, String)> {
        self.inner.flush()?;
        Ok((self.inner, hex::encode(self.hasher.finalize())))
    }
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(crate) fn write_sample_rows<W: Write>(
    sample: &Sample,
    locs: &mut W,
    truth: &mut W,
    prov: &mut W,
) -> io::Result<()> {
    let id = sample.sample_id;
    for r in &sample.localizations {
        writeln!(locs, "{id},{},{},{}", r.frame, fmt_coord(r.x_nm), fmt_coord(r.y_nm))?;
        writeln!(prov, "{id},{},{}", r.frame, r.true_emitter_id)?;
    }
    for (idx, p) in sample.ground_truth.iter().enumerate() {
        writeln!(truth, "{id},{idx},{},{}", fmt_coord(p.x_nm), fmt_coord(p.y_nm))?;
    }
    Ok(())
}
