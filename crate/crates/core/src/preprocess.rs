//! Label encoding, min-max scaling and the staged signature database.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signature::Signature;
use crate::svm::Dataset;

pub const FAULTY_TAG: &str = "FAULTY";
pub const HEALTHY_TAG: &str = "HEALTHY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LinkClass {
    Faulty,
    Healthy,
}

impl LinkClass {
    /// +1 for a faulty link, -1 for a healthy one.
    pub fn sign(self) -> i8 {
        match self {
            LinkClass::Faulty => 1,
            LinkClass::Healthy => -1,
        }
    }
}

/// Class label of a signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Link(LinkClass),
    /// `0` is the healthy client, `1..=p` index the registered faults.
    Client(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Link,
    Client,
}

impl Label {
    pub const FAULTY: Label = Label::Link(LinkClass::Faulty);
    pub const HEALTHY_LINK: Label = Label::Link(LinkClass::Healthy);
    pub const HEALTHY_CLIENT: Label = Label::Client(0);

    pub fn kind(self) -> LabelKind {
        match self {
            Label::Link(_) => LabelKind::Link,
            Label::Client(_) => LabelKind::Client,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Link(LinkClass::Faulty) => f.write_str("+1"),
            Label::Link(LinkClass::Healthy) => f.write_str("-1"),
            Label::Client(j) => write!(f, "cf_{j}"),
        }
    }
}

impl FromStr for Label {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+1" | "1" => Ok(Label::FAULTY),
            "-1" => Ok(Label::HEALTHY_LINK),
            _ => s
                .strip_prefix("cf_")
                .and_then(|j| j.parse().ok())
                .map(Label::Client)
                .ok_or_else(|| Error::UnknownLabel(s.to_string())),
        }
    }
}

/// Client fault names and their class indices `1..=p`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FaultRegistry(BTreeMap<String, usize>);

impl FaultRegistry {
    pub fn new(entries: impl IntoIterator<Item = (String, usize)>) -> Result<Self> {
        let reg = FaultRegistry(entries.into_iter().collect());
        reg.validate()?;
        Ok(reg)
    }

    /// The four client faults studied on the testbed.
    pub fn standard() -> Self {
        FaultRegistry::new([
            ("sack_disabled".to_string(), 1),
            ("dsack_disabled".to_string(), 2),
            ("read_buf".to_string(), 3),
            ("write_buf".to_string(), 4),
        ])
        .expect("standard registry is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for (name, &idx) in &self.0 {
            if name.is_empty() || name == HEALTHY_TAG || name == FAULTY_TAG {
                return Err(Error::Config(format!("invalid fault name {name:?}")));
            }
            if idx == 0 || !seen.insert(idx) {
                return Err(Error::Config(format!(
                    "fault {name:?} has a zero or repeated index {idx}"
                )));
            }
        }
        Ok(())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.0.get(name).copied()
    }

    pub fn name_of(&self, index: usize) -> Option<&str> {
        self.0
            .iter()
            .find(|(_, &i)| i == index)
            .map(|(n, _)| n.as_str())
    }

    pub fn insert(&mut self, name: impl Into<String>, index: usize) -> Result<()> {
        let mut next = self.clone();
        next.0.insert(name.into(), index);
        next.validate()?;
        *self = next;
        Ok(())
    }

    /// `(index, name)` in index order.
    pub fn faults(&self) -> Vec<(usize, String)> {
        let mut v: Vec<_> = self.0.iter().map(|(n, &i)| (i, n.clone())).collect();
        v.sort();
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Maps a categorical tag to its numeric label.
pub fn encode_label(tag: &str, kind: LabelKind, registry: &FaultRegistry) -> Result<Label> {
    match (kind, tag) {
        (LabelKind::Link, FAULTY_TAG) => Ok(Label::FAULTY),
        (LabelKind::Link, HEALTHY_TAG) => Ok(Label::HEALTHY_LINK),
        (LabelKind::Client, HEALTHY_TAG) => Ok(Label::HEALTHY_CLIENT),
        (LabelKind::Client, name) => registry
            .index_of(name)
            .map(Label::Client)
            .ok_or_else(|| Error::UnknownLabel(name.to_string())),
        (LabelKind::Link, other) => Err(Error::UnknownLabel(other.to_string())),
    }
}

/// Per-feature linear map onto `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Scaler<F: Scalar> {
    pub min: Vec<F>,
    pub max: Vec<F>,
    pub fitted_on: usize,
}

impl<F: Scalar> Scaler<F> {
    /// Column-wise extrema of the training rows.
    pub fn fit(rows: &[Vec<F>]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::TooFewRows {
                needed: 2,
                got: rows.len(),
            });
        }
        let m = rows[0].len();
        let mut min = rows[0].clone();
        let mut max = rows[0].clone();
        for r in &rows[1..] {
            if r.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: r.len(),
                });
            }
            for (j, &v) in r.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Scaler {
            min,
            max,
            fitted_on: rows.len(),
        })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Scales one vector; constant features map to 0, out-of-range values clamp.
    pub fn apply(&self, x: &[F]) -> Result<Vec<F>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| {
                if hi > lo {
                    ((v - lo) / (hi - lo)).max(F::zero()).min(F::one())
                } else {
                    F::zero()
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Preliminary,
    Scaled,
    Optimum,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Preliminary => "preliminary",
            Stage::Scaled => "scaled",
            Stage::Optimum => "optimum",
        }
    }
}

/// Labeled signatures at one stage of preparation.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureDatabase {
    pub stage: Stage,
    pub catalog_version: String,
    pub feature_names: Vec<String>,
    pub rows: Vec<Signature>,
    pub scaler: Option<Scaler<f64>>,
    pub selected_features: Option<Vec<usize>>,
    pub fault_registry: FaultRegistry,
}

impl SignatureDatabase {
    /// Raw, unscaled database; every row must be labeled and match `m`.
    pub fn preliminary(
        catalog_version: impl Into<String>,
        feature_names: Vec<String>,
        rows: Vec<Signature>,
        fault_registry: FaultRegistry,
    ) -> Result<Self> {
        let db = SignatureDatabase {
            stage: Stage::Preliminary,
            catalog_version: catalog_version.into(),
            feature_names,
            rows,
            scaler: None,
            selected_features: None,
            fault_registry,
        };
        db.validate()?;
        Ok(db)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.feature_names.len();
        for r in &self.rows {
            if r.values.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: r.values.len(),
                });
            }
            if r.catalog_version != self.catalog_version {
                return Err(Error::CatalogMismatch(format!(
                    "row has catalog {:?}, database has {:?}",
                    r.catalog_version, self.catalog_version
                )));
            }
            if r.label.is_none() {
                return Err(Error::UnknownLabel("<missing>".into()));
            }
            if r.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteInput);
            }
        }
        let kinds: std::collections::BTreeSet<_> = self.labels().map(|l| l.kind() as u8).collect();
        if kinds.len() > 1 {
            return Err(Error::Config("database mixes link and client labels".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.rows.iter().map(|r| r.label.expect("validated rows are labeled"))
    }

    pub fn label_kind(&self) -> Option<LabelKind> {
        self.labels().next().map(Label::kind)
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels().filter(|&l| l == label).count()
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.values.clone()).collect()
    }

    fn require(&self, stage: Stage) -> Result<()> {
        if self.stage == stage {
            Ok(())
        } else {
            Err(Error::StageMismatch {
                expected: stage.name(),
                found: self.stage.name(),
            })
        }
    }

    /// Fits a scaler on a preliminary database.
    pub fn fit_scaler(&self) -> Result<Scaler<f64>> {
        self.require(Stage::Preliminary)?;
        Scaler::fit(&self.matrix())
    }

    /// Applies `scaler`, producing the scaled stage. Refuses already-scaled data.
    pub fn scaled(&self, scaler: &Scaler<f64>) -> Result<Self> {
        self.require(Stage::Preliminary)?;
        let rows = self
            .rows
            .iter()
            .map(|r| {
                Ok(Signature {
                    values: scaler.apply(&r.values)?,
                    ..r.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SignatureDatabase {
            stage: Stage::Scaled,
            rows,
            scaler: Some(scaler.clone()),
            ..self.clone()
        })
    }

    /// Column slice of a scaled database.
    pub fn project(&self, indices: &[usize]) -> Result<Self> {
        self.require(Stage::Scaled)?;
        let m = self.dim();
        let mut seen = std::collections::BTreeSet::new();
        for &i in indices {
            if i >= m {
                return Err(Error::IndexOutOfRange { index: i, m });
            }
            if !seen.insert(i) {
                return Err(Error::Config(format!("duplicate feature index {i}")));
            }
        }
        let rows = self
            .rows
            .iter()
            .map(|r| Signature {
                values: indices.iter().map(|&i| r.values[i]).collect(),
                ..r.clone()
            })
            .collect();
        Ok(SignatureDatabase {
            stage: Stage::Optimum,
            feature_names: indices.iter().map(|&i| self.feature_names[i].clone()).collect(),
            rows,
            selected_features: Some(indices.to_vec()),
            ..self.clone()
        })
    }

    /// Rows of `positive` become +1, rows of `negative` become -1, others are dropped.
    pub fn binary(&self, positive: Label, negative: Label) -> Result<Dataset<f64>> {
        let mut data = Dataset::default();
        for r in &self.rows {
            let y = match r.label {
                Some(l) if l == positive => 1,
                Some(l) if l == negative => -1,
                _ => continue,
            };
            data.x.push(r.values.clone());
            data.y.push(y);
        }
        for (label, sign) in [(positive, 1), (negative, -1)] {
            if !data.y.contains(&sign) {
                return Err(Error::MissingClass(label.to_string()));
            }
        }
        Ok(data)
    }

    /// Healthy-client rows plus the rows of fault `j` (labels unchanged).
    pub fn cf_subset(&self, j: usize) -> Result<Self> {
        let keep = |l: Option<Label>| matches!(l, Some(Label::Client(i)) if i == 0 || i == j);
        let rows: Vec<_> = self.rows.iter().filter(|r| keep(r.label)).cloned().collect();
        let db = SignatureDatabase {
            rows,
            ..self.clone()
        };
        if db.count(Label::Client(j)) == 0 {
            return Err(Error::MissingClass(format!("cf_{j}")));
        }
        if db.count(Label::HEALTHY_CLIENT) == 0 {
            return Err(Error::MissingClass("cf_0".into()));
        }
        Ok(db)
    }

    /// Rows at the given positions, in order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        SignatureDatabase {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            ..self.clone()
        }
    }
}

/// Builds a preliminary database from vectors tagged `FAULTY`/`HEALTHY`/fault names.
pub fn encode_labels(
    catalog_version: &str,
    feature_names: Vec<String>,
    rows: Vec<(Vec<f64>, String)>,
    kind: LabelKind,
    registry: &FaultRegistry,
) -> Result<SignatureDatabase> {
    let rows = rows
        .into_iter()
        .map(|(values, tag)| {
            Ok(Signature {
                values,
                label: Some(encode_label(&tag, kind, registry)?),
                catalog_version: catalog_version.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SignatureDatabase::preliminary(catalog_version, feature_names, rows, registry.clone())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    stage: Stage,
    catalog_version: String,
    scaler: Option<Scaler<f64>>,
    selected_features: Vec<usize>,
    fault_registry: FaultRegistry,
}

/// `db.csv` → `db.meta.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Writes the database CSV (`f_<name>...,label`) and its JSON sidecar.
pub fn write_database(db: &SignatureDatabase, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let header: Vec<String> = db
        .feature_names
        .iter()
        .map(|n| format!("f_{n}"))
        .chain(std::iter::once("label".to_string()))
        .collect();
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for r in &db.rows {
        let mut line = String::new();
        for v in &r.values {
            line.push_str(&format!("{v},"));
        }
        line.push_str(&r.label.expect("validated").to_string());
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)?;

    let side = Sidecar {
        stage: db.stage,
        catalog_version: db.catalog_version.clone(),
        scaler: db.scaler.clone(),
        selected_features: db.selected_features.clone().unwrap_or_default(),
        fault_registry: db.fault_registry.clone(),
    };
    let side_path = sidecar_path(path);
    let json = serde_json::to_string_pretty(&side).map_err(|e| Error::json(&side_path, e))?;
    std::fs::write(&side_path, json + "\n").map_err(|e| Error::io(&side_path, e))
}

pub fn read_database(path: impl AsRef<Path>) -> Result<SignatureDatabase> {
    let path = path.as_ref();
    let side_path = sidecar_path(path);
    let side_text = std::fs::read_to_string(&side_path).map_err(|e| Error::io(&side_path, e))?;
    let side: Sidecar =
        serde_json::from_str(&side_text).map_err(|e| Error::json(&side_path, e))?;

    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    })?;
    let header = reader
        .headers()
        .map_err(|e| Error::BadHeader {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.last() != Some(&"label") {
        return Err(Error::BadHeader {
            path: path.to_path_buf(),
            reason: "last column must be `label`".into(),
        });
    }
    let feature_names = cols[..cols.len() - 1]
        .iter()
        .map(|c| {
            c.strip_prefix("f_").map(str::to_string).ok_or_else(|| Error::BadHeader {
                path: path.to_path_buf(),
                reason: format!("feature column {c:?} lacks the f_ prefix"),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let malformed = |reason: String| Error::MalformedRow {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let rec = rec.map_err(|e| malformed(e.to_string()))?;
        if rec.len() != cols.len() {
            return Err(malformed(format!("expected {} columns", cols.len())));
        }
        let values = rec
            .iter()
            .take(feature_names.len())
            .map(|v| v.parse::<f64>().map_err(|e| malformed(format!("{v:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let label: Label = rec[cols.len() - 1].parse()?;
        rows.push(Signature {
            values,
            label: Some(label),
            catalog_version: side.catalog_version.clone(),
        });
    }
    let db = SignatureDatabase {
        stage: side.stage,
        catalog_version: side.catalog_version,
        feature_names,
        rows,
        scaler: side.scaler,
        selected_features: (side.stage == Stage::Optimum).then_some(side.selected_features),
        fault_registry: side.fault_registry,
    };
    db.validate()?;
    Ok(db)
}
