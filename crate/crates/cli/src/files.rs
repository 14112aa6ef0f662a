//! Trace-pair discovery and the small CSV files that label them.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use netdiag::eval::GroundTruth;
use netdiag::preprocess::{LinkClass, FAULTY_TAG, HEALTHY_TAG};
use netdiag::trace::read_trace;
use netdiag::TracePair;

pub const DOWN_SUFFIX: &str = ".down.csv";
pub const UP_SUFFIX: &str = ".up.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const LPD_LABELS_FILE: &str = "labels-lpd.csv";
pub const CFD_LABELS_FILE: &str = "labels-cfd.csv";
pub const SCENARIOS_FILE: &str = "scenarios.json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairFiles {
    pub download: PathBuf,
    pub upload: PathBuf,
}

impl PairFiles {
    pub fn of(prefix: &Path) -> Self {
        let base = prefix.as_os_str().to_string_lossy();
        PairFiles {
            download: PathBuf::from(format!("{base}{DOWN_SUFFIX}")),
            upload: PathBuf::from(format!("{base}{UP_SUFFIX}")),
        }
    }

    pub fn read(&self) -> anyhow::Result<TracePair> {
        let down = read_trace(&self.download)?;
        let up = read_trace(&self.upload)?;
        TracePair::new(down, up)
            .with_context(|| format!("pairing {} with {}", self.download.display(), self.upload.display()))
    }
}

/// `<id>.down.csv` / `<id>.up.csv` pairs in `dir`, by id. A file without its
/// partner is an error that names it.
pub fn discover_pairs(dir: &Path) -> anyhow::Result<BTreeMap<String, PairFiles>> {
    let mut downs = BTreeSet::new();
    let mut ups = BTreeSet::new();
    let entries = fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))?;
    for entry in entries {
        let entry = entry.with_context(|| format!("listing {}", dir.display()))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(id) = name.strip_suffix(DOWN_SUFFIX) {
            downs.insert(id.to_string());
        } else if let Some(id) = name.strip_suffix(UP_SUFFIX) {
            ups.insert(id.to_string());
        }
    }
    if let Some(id) = downs.symmetric_difference(&ups).next() {
        let (have, missing) = if downs.contains(id) {
            (DOWN_SUFFIX, UP_SUFFIX)
        } else {
            (UP_SUFFIX, DOWN_SUFFIX)
        };
        bail!(
            "orphan trace {}: no matching {id}{missing}",
            dir.join(format!("{id}{have}")).display()
        );
    }
    Ok(downs
        .into_iter()
        .map(|id| {
            let files = PairFiles::of(&dir.join(&id));
            (id, files)
        })
        .collect())
}

fn reader(path: &Path) -> anyhow::Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))
}

fn check_header(path: &Path, r: &mut csv::Reader<fs::File>, expected: &[&str]) -> anyhow::Result<()> {
    let header = r.headers().with_context(|| format!("{}: reading header", path.display()))?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        bail!("{}: header must be {}, found {}", path.display(), expected.join(","), got.join(","));
    }
    Ok(())
}

/// Rows of a CSV with the given header, keyed by the first column, each with
/// its 1-based line number.
fn keyed_rows(path: &Path, header: &[&str]) -> anyhow::Result<BTreeMap<String, (usize, Vec<String>)>> {
    let mut r = reader(path)?;
    check_header(path, &mut r, header)?;
    let mut out = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.with_context(|| format!("{}: line {line}", path.display()))?;
        let fields: Vec<String> = rec.iter().map(str::to_string).collect();
        let id = fields[0].clone();
        if id.is_empty() {
            bail!("{}: line {line}: empty id", path.display());
        }
        if let Some((first, _)) = out.insert(id.clone(), (line, fields[1..].to_vec())) {
            bail!("{}: line {line}: id {id:?} already listed on line {first}", path.display());
        }
    }
    Ok(out)
}

/// `id,label` file. Values are returned with their line numbers.
pub fn read_labels(path: &Path) -> anyhow::Result<BTreeMap<String, (usize, String)>> {
    Ok(keyed_rows(path, &["id", "label"])?
        .into_iter()
        .map(|(id, (line, mut rest))| (id, (line, rest.remove(0))))
        .collect())
}

pub fn write_labels<'a>(path: &Path, rows: impl IntoIterator<Item = (&'a str, String)>) -> anyhow::Result<()> {
    let mut text = String::from("id,label\n");
    for (id, tag) in rows {
        text.push_str(&format!("{id},{tag}\n"));
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `id,link,client_faults`: link is `FAULTY` or `HEALTHY`, faults are joined
/// with `+` and may be empty.
pub fn read_truth(path: &Path) -> anyhow::Result<BTreeMap<String, GroundTruth>> {
    keyed_rows(path, &["id", "link", "client_faults"])?
        .into_iter()
        .map(|(id, (line, rest))| {
            let link = match rest[0].as_str() {
                FAULTY_TAG => LinkClass::Faulty,
                HEALTHY_TAG => LinkClass::Healthy,
                other => {
                    return Err(anyhow!(
                        "{}: line {line}: link must be {FAULTY_TAG} or {HEALTHY_TAG}, found {other:?}",
                        path.display()
                    ))
                }
            };
            let client_faults = rest[1].split('+').filter(|s| !s.is_empty()).map(str::to_string).collect();
            Ok((id, GroundTruth { link, client_faults }))
        })
        .collect()
}

pub fn truth_row(truth: &GroundTruth) -> (&'static str, String) {
    let link = match truth.link {
        LinkClass::Faulty => FAULTY_TAG,
        LinkClass::Healthy => HEALTHY_TAG,
    };
    (link, truth.client_faults.iter().cloned().collect::<Vec<_>>().join("+"))
}

pub fn write_truth<'a>(path: &Path, rows: impl IntoIterator<Item = (&'a str, &'a GroundTruth)>) -> anyhow::Result<()> {
    let mut text = String::from("id,link,client_faults\n");
    for (id, truth) in rows {
        let (link, faults) = truth_row(truth);
        text.push_str(&format!("{id},{link},{faults}\n"));
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes `bytes` to `path` through a sibling temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))
}
