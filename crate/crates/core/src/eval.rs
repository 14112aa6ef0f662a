//! Cross-validation, confusion counts, kernel/C/sigma grid search and
//! verdict accuracy tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{self, CfdNetwork, LinkStatus, LpdClassifier, StageConfig, Verdict};
use crate::error::{Error, Result};
use crate::preprocess::{Label, LinkClass, SignatureDatabase};
use crate::rng::SplitMix64;
use crate::signature::extract_signature;
use crate::svm::{self, Config, Dataset, Kernel, KernelKind, Settings};
use crate::trace::TracePair;
use crate::SvmModel;

/// Binary outcome counts with +1 as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: i8, predicted: i8) {
        match (truth > 0, predicted > 0) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn n(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `(tp + tn) / n`, 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.n() {
            0 => 0.0,
            n => (self.tp + self.tn) as f64 / n as f64,
        }
    }

    /// `fp / (fp + tn)`, 0 when there are no negatives.
    pub fn false_positive_rate(&self) -> f64 {
        match self.fp + self.tn {
            0 => 0.0,
            neg => self.fp as f64 / neg as f64,
        }
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

/// Fold index for every row: rows of each class are shuffled with a seeded
/// generator and dealt round-robin, so each fold holds every class within one row.
pub fn stratified_folds<L: Ord + Copy>(labels: &[L], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    let mut by_class: BTreeMap<L, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut folds = vec![0; labels.len()];
    let mut next = 0;
    for (stream, rows) in by_class.values_mut().enumerate() {
        if rows.len() < k {
            return Err(Error::InsufficientRows(format!(
                "a class has {} rows, fewer than k = {k}",
                rows.len()
            )));
        }
        rows.shuffle(&mut SplitMix64::fork(seed, stream as u64));
        for &r in rows.iter() {
            folds[r] = next % k;
            next += 1;
        }
    }
    Ok(folds)
}

fn fold_count(folds: &[usize]) -> usize {
    folds.iter().max().map_or(0, |&f| f + 1)
}

/// Mean per-fold accuracy and the pooled counts of an SVM cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub mean_accuracy: f64,
    pub pooled: ConfusionMatrix,
    pub folds: Vec<ConfusionMatrix>,
}

impl CvSummary {
    fn from_folds(folds: Vec<ConfusionMatrix>) -> Self {
        let mut pooled = ConfusionMatrix::default();
        folds.iter().for_each(|f| pooled.merge(f));
        let mean_accuracy = folds.iter().map(ConfusionMatrix::accuracy).sum::<f64>() / folds.len() as f64;
        CvSummary {
            mean_accuracy,
            pooled,
            folds,
        }
    }
}

/// Trains on all folds but one and tests on the held-out fold, for each fold.
pub fn cross_validate(data: &Dataset<f64>, config: &Config<f64>, folds: &[usize]) -> Result<CvSummary> {
    let k = fold_count(folds);
    let per_fold = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..data.len()).filter(|&i| folds[i] != f).collect();
            let model = svm::train(&data.subset(&train), config)?;
            let mut cm = ConfusionMatrix::default();
            for i in (0..data.len()).filter(|&i| folds[i] == f) {
                cm.record(data.y[i], model.classify(&data.x[i])?);
            }
            Ok(cm)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvSummary::from_folds(per_fold))
}

/// Cross-validation of the whole training pipeline (scaling, ranking,
/// wrapper, SVM), refitted inside each training fold.
#[derive(Debug, Clone)]
pub struct PipelineCv {
    pub mean_accuracy: f64,
    pub folds: Vec<ConfusionMatrix>,
    /// The model trained for each fold, for inspection.
    pub models: Vec<SvmModel>,
}

/// Stratified k-fold CV of the pipeline on the rows labeled `positive` or `negative`.
pub fn k_fold_cv(
    db: &SignatureDatabase,
    positive: Label,
    negative: Label,
    config: &StageConfig,
    k: usize,
    seed: u64,
) -> Result<PipelineCv> {
    let rows = binary_rows(db, positive, negative);
    let labels: Vec<i8> = rows.iter().map(|r| r.1).collect();
    let folds = stratified_folds(&labels, k, seed)?;
    k_fold_cv_with(db, positive, negative, config, &folds)
}

fn binary_rows(db: &SignatureDatabase, positive: Label, negative: Label) -> Vec<(usize, i8)> {
    db.labels()
        .enumerate()
        .filter_map(|(i, l)| match l {
            l if l == positive => Some((i, 1)),
            l if l == negative => Some((i, -1)),
            _ => None,
        })
        .collect()
}

/// As [`k_fold_cv`] with an explicit fold index per binary row, in database order.
pub fn k_fold_cv_with(
    db: &SignatureDatabase,
    positive: Label,
    negative: Label,
    config: &StageConfig,
    folds: &[usize],
) -> Result<PipelineCv> {
    let rows = binary_rows(db, positive, negative);
    if rows.len() != folds.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            got: folds.len(),
        });
    }
    let k = fold_count(folds);
    let results = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = rows
                .iter()
                .zip(folds)
                .filter(|(_, &g)| g != f)
                .map(|(r, _)| r.0)
                .collect();
            let trained = cascade::train_stage(&db.subset(&train), positive, negative, config)?;
            let mut cm = ConfusionMatrix::default();
            for (&(i, y), _) in rows.iter().zip(folds).filter(|(_, &g)| g == f) {
                let d = trained.model.decision_value_raw(&db.rows[i].values)?;
                cm.record(y, svm::sign_of(d));
            }
            Ok((cm, trained.model))
        })
        .collect::<Result<Vec<_>>>()?;
    let (folds, models): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let summary = CvSummary::from_folds(folds);
    Ok(PipelineCv {
        mean_accuracy: summary.mean_accuracy,
        folds: summary.folds,
        models,
    })
}

pub const DEFAULT_C_GRID: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
pub const DEFAULT_SIGMA_SCALES: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

/// Axes of the kernel/C/sigma grid. Sigma scales multiply the default RBF width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub kernels: Vec<KernelKind>,
    pub c_values: Vec<f64>,
    pub sigma_scales: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            kernels: vec![KernelKind::Linear, KernelKind::Quadratic, KernelKind::Cubic, KernelKind::Rbf],
            c_values: DEFAULT_C_GRID.to_vec(),
            sigma_scales: DEFAULT_SIGMA_SCALES.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub kernel: KernelKind,
    #[serde(rename = "C")]
    pub c: f64,
    pub sigma_scale: Option<f64>,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub kernels: Vec<KernelKind>,
    pub c_values: Vec<f64>,
    pub sigma_scales: Vec<f64>,
    /// Cells in tie-break order: kernel, then C, then sigma scale.
    pub cells: Vec<GridCell>,
    pub best: usize,
    /// Number of cells sharing the best accuracy.
    pub tied_at_best: usize,
}

impl GridResult {
    pub fn best_cell(&self) -> &GridCell {
        &self.cells[self.best]
    }

    /// Solver settings of the winning cell for `q` inputs.
    pub fn best_config(&self, q: usize, base: &Settings<f64>) -> Config<f64> {
        let cell = self.best_cell();
        Config {
            kernel: Kernel::from_kind(cell.kernel, q, cell.sigma_scale.unwrap_or(1.0)),
            c: cell.c,
            max_iter: base.max_iter,
            tol: base.tol,
        }
    }
}

fn sorted_axis(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Exhaustive CV over the grid; the first cell (in tie-break order) with the
/// highest mean accuracy wins.
pub fn select_model(
    data: &Dataset<f64>,
    grid: &GridSpec,
    base: &Settings<f64>,
    k: usize,
    seed: u64,
) -> Result<GridResult> {
    let mut kernels = grid.kernels.clone();
    kernels.sort();
    kernels.dedup();
    let c_values = sorted_axis(&grid.c_values);
    let sigma_scales = sorted_axis(&grid.sigma_scales);
    let mut plan = Vec::new();
    for &kind in &kernels {
        for &c in &c_values {
            if kind == KernelKind::Rbf {
                plan.extend(sigma_scales.iter().map(|&s| (kind, c, Some(s))));
            } else {
                plan.push((kind, c, None));
            }
        }
    }
    if plan.is_empty() {
        return Err(Error::Config("model-selection grid is empty".into()));
    }
    let folds = stratified_folds(&data.y, k, seed)?;
    let q = data.dim();
    let cells = plan
        .par_iter()
        .map(|&(kernel, c, sigma_scale)| {
            let config = Config {
                kernel: Kernel::from_kind(kernel, q, sigma_scale.unwrap_or(1.0)),
                c,
                max_iter: base.max_iter,
                tol: base.tol,
            };
            let cv = cross_validate(data, &config, &folds)?;
            Ok(GridCell {
                kernel,
                c,
                sigma_scale,
                accuracy: cv.mean_accuracy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, cell) in cells.iter().enumerate() {
        if cell.accuracy > cells[best].accuracy {
            best = i;
        }
    }
    let tied_at_best = cells.iter().filter(|c| c.accuracy == cells[best].accuracy).count();
    Ok(GridResult {
        kernels,
        c_values,
        sigma_scales,
        cells,
        best,
        tied_at_best,
    })
}

/// Known condition of a labeled trace pair or signature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub link: LinkClass,
    pub client_faults: BTreeSet<String>,
}

impl GroundTruth {
    pub fn faulty_link() -> Self {
        GroundTruth {
            link: LinkClass::Faulty,
            client_faults: BTreeSet::new(),
        }
    }

    pub fn healthy(faults: &[&str]) -> Self {
        GroundTruth {
            link: LinkClass::Healthy,
            client_faults: faults.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Table row this case is counted under.
    pub fn condition(&self) -> String {
        match self.link {
            LinkClass::Faulty => FAULTY_LINK_ROW.to_string(),
            LinkClass::Healthy if self.client_faults.is_empty() => DEFAULT_CLIENT_ROW.to_string(),
            LinkClass::Healthy => self.client_faults.iter().cloned().collect::<Vec<_>>().join("+"),
        }
    }

    pub fn matches(&self, verdict: &Verdict) -> bool {
        match self.link {
            LinkClass::Faulty => verdict.link == LinkStatus::Faulty,
            LinkClass::Healthy => {
                verdict.link == LinkStatus::Healthy && verdict.client_faults == self.client_faults
            }
        }
    }
}

pub const FAULTY_LINK_ROW: &str = "faulty link";
pub const DEFAULT_CLIENT_ROW: &str = "default client";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub condition: String,
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Per-condition accuracy of full verdicts plus link-stage counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub rows: Vec<ReportRow>,
    /// Link stage with "faulty" as the positive class.
    pub link: ConfusionMatrix,
}

impl VerdictReport {
    pub fn row(&self, condition: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.condition == condition)
    }

    /// Aligned text table, one condition per line.
    pub fn to_table(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.condition.len())
            .chain(["condition".len()])
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>5}  {:>7}  {:>9}", "condition", "n", "correct", "accuracy");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>5}  {:>7}  {:>8.2}%",
                r.condition,
                r.n,
                r.correct,
                100.0 * r.accuracy
            );
        }
        let _ = writeln!(
            out,
            "link stage: tp={} fp={} tn={} fn={} accuracy={:.2}%",
            self.link.tp,
            self.link.fp,
            self.link.tn,
            self.link.fn_,
            100.0 * self.link.accuracy()
        );
        out
    }
}

impl fmt::Display for VerdictReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_table())
    }
}

/// Tabulates verdicts against ground truth.
pub fn tabulate(cases: &[(Verdict, GroundTruth)]) -> VerdictReport {
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut link = ConfusionMatrix::default();
    for (verdict, truth) in cases {
        let e = counts.entry(truth.condition()).or_default();
        e.0 += 1;
        if truth.matches(verdict) {
            e.1 += 1;
        }
        let predicted = if verdict.link == LinkStatus::Faulty { 1 } else { -1 };
        link.record(LinkClass::sign(truth.link), predicted);
    }
    let rank = |c: &str| match c {
        FAULTY_LINK_ROW => 0,
        DEFAULT_CLIENT_ROW => 1,
        c if c.contains('+') => 3,
        _ => 2,
    };
    let mut rows: Vec<ReportRow> = counts
        .into_iter()
        .map(|(condition, (n, correct))| ReportRow {
            accuracy: correct as f64 / n as f64,
            condition,
            n,
            correct,
        })
        .collect();
    rows.sort_by(|a, b| rank(&a.condition).cmp(&rank(&b.condition)).then(a.condition.cmp(&b.condition)));
    VerdictReport { rows, link }
}

/// Diagnoses raw signatures and tabulates against ground truth. Without a
/// link classifier every case goes straight to the client stage.
pub fn evaluate_signatures(
    cases: &[(Vec<f64>, GroundTruth)],
    lpd: Option<&LpdClassifier>,
    cfd: &CfdNetwork,
) -> Result<VerdictReport> {
    let verdicts = cases
        .par_iter()
        .map(|(x, truth)| Ok((cascade::diagnose_values(lpd, cfd, x)?, truth.clone())))
        .collect::<Result<Vec<_>>>()?;
    Ok(tabulate(&verdicts))
}

/// Extracts, diagnoses and tabulates labeled trace pairs.
pub fn evaluate_verdicts(
    cases: &[(TracePair, GroundTruth)],
    lpd: &LpdClassifier,
    cfd: &CfdNetwork,
) -> Result<VerdictReport> {
    let catalog = cascade::bundle_catalog(lpd, cfd)?;
    let verdicts = cases
        .par_iter()
        .map(|(pair, truth)| {
            let sig = extract_signature(pair, &catalog)?;
            Ok((cascade::diagnose_values(Some(lpd), cfd, &sig.values)?, truth.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(tabulate(&verdicts))
}
