use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dataset::format::{fmt_coord, sha256_hex, FileKind, FORMAT_VERSION, MANIFEST_FILE};
use crate::dataset::{DatasetError, DatasetManifest, Sample, Split};
use crate::point::Point;
use crate::sim::LocalizationRecord;

/// A fully verified dataset held in memory, samples ordered by id.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
    samples: Vec<Sample>,
}

impl LoadedDataset {
    pub fn iter(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn split(&self, split: Split) -> &[Sample] {
        let r = self.manifest.splits.range(split);
        &self.samples[r.start as usize..r.end as usize]
    }

    pub fn get(&self, sample_id: u64) -> Option<&Sample> {
        self.samples.get(sample_id as usize)
    }
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest, DatasetError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| DatasetError::io(&path, e))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| DatasetError::Manifest {
            path: path.clone(),
            message: e.to_string(),
        })?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(DatasetError::VersionMismatch {
            found: manifest.format_version,
            expected: FORMAT_VERSION,
        });
    }
    if manifest.splits.total() != manifest.n_samples {
        return Err(DatasetError::Manifest {
            path,
            message: format!(
                "split sizes sum to {}, n_samples is {}",
                manifest.splits.total(),
                manifest.n_samples
            ),
        });
    }
    Ok(manifest)
}

struct CsvFile<'a> {
    name: String,
    text: &'a str,
}

impl<'a> CsvFile<'a> {
    fn err(&self, line: u64, message: impl Into<String>) -> DatasetError {
        DatasetError::Parse {
            file: self.name.clone(),
            line,
            message: message.into(),
        }
    }

    /// Data rows as `(line_number, fields)` after checking the header.
    fn rows(&self, header: &str, width: usize) -> Result<Vec<(u64, Vec<&'a str>)>, DatasetError> {
        let mut lines = self.text.split_terminator('\n');
        match lines.next() {
            Some(h) if h == header => {}
            Some(h) => return Err(self.err(1, format!("expected header '{header}', found '{h}'"))),
            None => return Err(self.err(1, "missing header")),
        }
        if !self.text.ends_with('\n') {
            let last = self.text.split_terminator('\n').count() as u64;
            return Err(self.err(last, "file does not end with a newline (truncated?)"));
        }
        lines
            .enumerate()
            .map(|(i, line)| {
                let n = i as u64 + 2;
                let fields: Vec<&str> = line.split(',').collect();
                if fields.len() != width {
                    return Err(self.err(
                        n,
                        format!("expected {width} fields, found {}", fields.len()),
                    ));
                }
                Ok((n, fields))
            })
            .collect()
    }

    fn parse<T: FromStr>(&self, line: u64, field: &str, what: &str) -> Result<T, DatasetError> {
        field
            .parse()
            .map_err(|_| self.err(line, format!("invalid {what} '{field}'")))
    }
}

fn read_split(
    manifest: &DatasetManifest,
    split: Split,
    texts: &BTreeMap<String, String>,
) -> Result<Vec<Sample>, DatasetError> {
    let file = |kind: FileKind| {
        let name = kind.file_name(split);
        CsvFile {
            text: texts[&name].as_str(),
            name,
        }
    };
    let range = manifest.splits.range(split);
    let mut samples: BTreeMap<u64, Sample> = BTreeMap::new();

    let gt = file(FileKind::GroundTruth);
    for (line, f) in gt.rows(FileKind::GroundTruth.header(), 4)? {
        let id: u64 = gt.parse(line, f[0], "sample_id")?;
        let idx: usize = gt.parse(line, f[1], "emitter_idx")?;
        let x: f64 = gt.parse(line, f[2], "x_nm")?;
        let y: f64 = gt.parse(line, f[3], "y_nm")?;
        if !range.contains(&id) {
            return Err(gt.err(line, format!("sample {id} does not belong to split {split}")));
        }
        let s = samples.entry(id).or_insert_with(|| Sample {
            sample_id: id,
            ground_truth: vec![],
            localizations: vec![],
            seq_len: 0,
        });
        if idx != s.ground_truth.len() {
            return Err(gt.err(line, format!("emitter_idx {idx} out of sequence")));
        }
        s.ground_truth.push(Point::new(x, y));
    }
    if samples.len() as u64 != range.end - range.start {
        let missing = range.clone().find(|id| !samples.contains_key(id));
        return Err(gt.err(
            0,
            format!("ground truth missing for sample {}", missing.unwrap_or_default()),
        ));
    }

    let locs = file(FileKind::Localizations);
    let prov = file(FileKind::Provenance);
    let loc_rows = locs.rows(FileKind::Localizations.header(), 4)?;
    let prov_rows = prov.rows(FileKind::Provenance.header(), 3)?;
    if loc_rows.len() != prov_rows.len() {
        let line = loc_rows.len().min(prov_rows.len()) as u64 + 2;
        return Err(prov.err(
            line,
            format!(
                "{} provenance rows for {} localization rows",
                prov_rows.len(),
                loc_rows.len()
            ),
        ));
    }
    let mut last: Option<(u64, u32)> = None;
    for ((line, l), (pline, p)) in loc_rows.into_iter().zip(prov_rows) {
        let id: u64 = locs.parse(line, l[0], "sample_id")?;
        let frame: u32 = locs.parse(line, l[1], "frame")?;
        let x: f64 = locs.parse(line, l[2], "x_nm")?;
        let y: f64 = locs.parse(line, l[3], "y_nm")?;
        let pid: u64 = prov.parse(pline, p[0], "sample_id")?;
        let pframe: u32 = prov.parse(pline, p[1], "frame")?;
        let emitter: u32 = prov.parse(pline, p[2], "true_emitter_idx")?;
        if (pid, pframe) != (id, frame) {
            return Err(prov.err(pline, "row does not match the localization row"));
        }
        if frame == 0 {
            return Err(locs.err(line, "frames are 1-based"));
        }
        if last.is_some_and(|k| k > (id, frame)) {
            return Err(locs.err(line, "rows not sorted by (sample_id, frame)"));
        }
        last = Some((id, frame));
        let s = samples
            .get_mut(&id)
            .ok_or_else(|| locs.err(line, format!("sample {id} has no ground truth")))?;
        if emitter as usize >= s.ground_truth.len() {
            return Err(prov.err(pline, format!("emitter index {emitter} out of range")));
        }
        s.localizations.push(LocalizationRecord {
            frame,
            x_nm: x,
            y_nm: y,
            true_emitter_id: emitter,
        });
        s.seq_len = frame;
    }
    Ok(samples.into_values().collect())
}

/// Reads and verifies a dataset directory: version, per-file SHA-256
/// digests, then every record.
pub fn load_dataset(dir: &Path) -> Result<LoadedDataset, DatasetError> {
    let manifest = read_manifest(dir)?;
    let digests: BTreeMap<&str, &str> = manifest
        .files
        .iter()
        .map(|f| (f.name.as_str(), f.sha256.as_str()))
        .collect();
    let mut texts = BTreeMap::new();
    for split in Split::ALL {
        for kind in FileKind::ALL {
            let name = kind.file_name(split);
            let expected = digests.get(name.as_str()).ok_or_else(|| DatasetError::Manifest {
                path: dir.join(MANIFEST_FILE),
                message: format!("no digest listed for {name}"),
            })?;
            let path = dir.join(&name);
            let bytes = fs::read(&path).map_err(|e| DatasetError::io(&path, e))?;
            let actual = sha256_hex(&bytes);
            if actual != *expected {
                return Err(DatasetError::Integrity {
                    file: name,
                    expected: expected.to_string(),
                    actual,
                });
            }
            let text = String::from_utf8(bytes).map_err(|_| DatasetError::Parse {
                file: name.clone(),
                line: 0,
                message: "not valid UTF-8".into(),
            })?;
            texts.insert(name, text);
        }
    }
    let mut samples = Vec::with_capacity(manifest.n_samples as usize);
    for split in Split::ALL {
        samples.extend(read_split(&manifest, split, &texts)?);
    }
    if let Some(s) = samples.iter().find(|s| s.seq_len > manifest.max_seq_len) {
        return Err(DatasetError::Manifest {
            path: dir.join(MANIFEST_FILE),
            message: format!(
                "sample {} has sequence length {} > max_seq_len {}",
                s.sample_id, s.seq_len, manifest.max_seq_len
            ),
        });
    }
    Ok(LoadedDataset {
        root: dir.to_path_buf(),
        manifest,
        samples,
    })
}

fn distinct_frames(s: &Sample) -> u64 {
    s.localizations
        .chunk_by(|a, b| a.frame == b.frame)
        .count() as u64
}

/// Line-oriented canonical text of every record, used as the parity
/// reference for other readers of the format.
pub fn write_canonical_dump<W: Write>(ds: &LoadedDataset, mut w: W) -> std::io::Result<()> {
    let m = &ds.manifest;
    writeln!(
        w,
        "dataset condition={} n_samples={} n_out={} max_seq_len={}",
        m.condition, m.n_samples, m.n_out, m.max_seq_len
    )?;
    for split in Split::ALL {
        for s in ds.split(split) {
            writeln!(
                w,
                "sample {split} {} n_truth={} n_loc={} seq_len={} masked={}",
                s.sample_id,
                s.ground_truth.len(),
                s.localizations.len(),
                s.seq_len,
                u64::from(m.max_seq_len) - distinct_frames(s)
            )?;
            for (i, p) in s.ground_truth.iter().enumerate() {
                writeln!(w, "gt {i} {} {}", fmt_coord(p.x_nm), fmt_coord(p.y_nm))?;
            }
            for r in &s.localizations {
                writeln!(
                    w,
                    "loc {} {} {} {}",
                    r.frame,
                    fmt_coord(r.x_nm),
                    fmt_coord(r.y_nm),
                    r.true_emitter_id
                )?;
            }
        }
    }
    Ok(())
}
