//! Hybrid feature selection: a two-sample t-test ranks the features, then
//! cross-validation over growing prefixes of that ranking picks how many to keep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{cross_validate, stratified_folds};
use crate::preprocess::{Label, SignatureDatabase, Stage};
use crate::scalar::Scalar;
use crate::svm::Settings;

/// Floor on the (pooled or per-sample) variance.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Prefix sizes tried when none are configured; `m` itself is appended.
pub const DEFAULT_CANDIDATE_SIZES: [usize; 8] = [5, 10, 15, 20, 25, 50, 75, 100];

pub const DEFAULT_FOLDS: usize = 5;

fn mean_var<F: Scalar>(x: &[F]) -> (F, F) {
    let n = F::from_usize_lossy(x.len());
    let mean = x.iter().fold(F::zero(), |a, &v| a + v) / n;
    let ss = x.iter().fold(F::zero(), |a, &v| a + (v - mean) * (v - mean));
    (mean, ss / (n - F::one()))
}

/// Two-sample t statistic of `mean(a) - mean(b)`.
///
/// Pooled-variance Student's t by default, Welch's unequal-variance form when
/// `welch` is set. Variances are floored at [`VARIANCE_FLOOR`].
pub fn t_statistic<F: Scalar>(a: &[F], b: &[F], welch: bool) -> Result<F> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::TooFewSamples(a.len(), b.len()));
    }
    let floor = F::from_f64_lossy(VARIANCE_FLOOR);
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (F::from_usize_lossy(a.len()), F::from_usize_lossy(b.len()));
    let se2 = if welch {
        va.max(floor) / na + vb.max(floor) / nb
    } else {
        let two = F::from_f64_lossy(2.0);
        let pooled = ((na - F::one()) * va + (nb - F::one()) * vb) / (na + nb - two);
        pooled.max(floor) * (F::one() / na + F::one() / nb)
    };
    Ok((ma - mb) / se2.sqrt())
}

/// Per-feature t statistics and the features ordered by `|t|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestRanking {
    pub t_statistic: Vec<f64>,
    /// Feature indices by descending `|t|`, ties to the lower index.
    pub abs_t_order: Vec<usize>,
}

impl TTestRanking {
    fn from_stats(t_statistic: Vec<f64>) -> Self {
        let mut abs_t_order: Vec<usize> = (0..t_statistic.len()).collect();
        abs_t_order.sort_by(|&i, &j| t_statistic[j].abs().total_cmp(&t_statistic[i].abs()));
        TTestRanking {
            t_statistic,
            abs_t_order,
        }
    }

    pub fn top(&self, q: usize) -> Vec<usize> {
        self.abs_t_order[..q.min(self.abs_t_order.len())].to_vec()
    }
}

/// Ranks the columns of `x` by the t statistic between rows with `y = +1`
/// and rows with `y = -1`.
pub fn rank_columns<F: Scalar>(x: &[Vec<F>], y: &[i8], welch: bool) -> Result<TTestRanking> {
    let m = x.first().map_or(0, Vec::len);
    let stats = (0..m)
        .map(|j| {
            let pos: Vec<F> = x.iter().zip(y).filter(|(_, &l)| l > 0).map(|(r, _)| r[j]).collect();
            let neg: Vec<F> = x.iter().zip(y).filter(|(_, &l)| l < 0).map(|(r, _)| r[j]).collect();
            t_statistic(&pos, &neg, welch).map(|t| t.to_f64_lossy())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TTestRanking::from_stats(stats))
}

/// Ranks the features of a scaled database, `positive` against `negative`.
pub fn rank_features(
    db: &SignatureDatabase,
    positive: Label,
    negative: Label,
    welch: bool,
) -> Result<TTestRanking> {
    if db.stage != Stage::Scaled {
        return Err(Error::StageMismatch {
            expected: Stage::Scaled.name(),
            found: db.stage.name(),
        });
    }
    let data = db.binary(positive, negative)?;
    rank_columns(&data.x, &data.y, welch)
}

/// How the wrapper scores and picks prefix sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WrapperOptions {
    /// Prefix sizes to try; empty means the default grid.
    pub candidate_sizes: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
    /// Weight of the false-positive rate subtracted from CV accuracy.
    pub fp_penalty: f64,
}

impl Default for WrapperOptions {
    fn default() -> Self {
        WrapperOptions {
            candidate_sizes: Vec::new(),
            folds: DEFAULT_FOLDS,
            seed: 0,
            fp_penalty: 0.0,
        }
    }
}

impl WrapperOptions {
    /// Configured sizes restricted to `[1, m]`, sorted and deduplicated.
    /// Falls back to `{m}` when nothing survives.
    pub fn sizes_for(&self, m: usize) -> Vec<usize> {
        let mut sizes: Vec<usize> = if self.candidate_sizes.is_empty() {
            DEFAULT_CANDIDATE_SIZES.iter().copied().chain([m]).collect()
        } else {
            self.candidate_sizes.clone()
        };
        sizes.retain(|&q| q >= 1 && q <= m);
        sizes.sort_unstable();
        sizes.dedup();
        if sizes.is_empty() && m > 0 {
            sizes.push(m);
        }
        sizes
    }
}

/// Outcome of the wrapper stage, serialized next to each trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub candidate_sizes: Vec<usize>,
    pub cv_accuracy: Vec<f64>,
    /// Accuracy minus the weighted false-positive rate; equals `cv_accuracy`
    /// when the penalty is zero.
    pub cv_objective: Vec<f64>,
    pub fp_penalty: f64,
    pub folds: usize,
    pub chosen_q: usize,
    pub chosen_indices: Vec<usize>,
    pub ranking: TTestRanking,
}

impl SelectionReport {
    pub fn chosen_accuracy(&self) -> f64 {
        let i = self
            .candidate_sizes
            .iter()
            .position(|&q| q == self.chosen_q)
            .expect("chosen size is a candidate");
        self.cv_accuracy[i]
    }

    /// Fraction of the original dimension removed by the selection.
    pub fn reduction(&self) -> f64 {
        dimensionality_reduction(self.ranking.abs_t_order.len(), self.chosen_q)
    }
}

/// `1 - q/m`.
pub fn dimensionality_reduction(m: usize, q: usize) -> f64 {
    1.0 - q as f64 / m as f64
}

/// Cross-validates an SVM on every candidate prefix of the ranking and keeps
/// the prefix with the best objective (smaller prefix on ties).
pub fn wrapper_select(
    db: &SignatureDatabase,
    ranking: &TTestRanking,
    positive: Label,
    negative: Label,
    options: &WrapperOptions,
    settings: &Settings<f64>,
) -> Result<SelectionReport> {
    if options.folds < 2 {
        return Err(Error::Config(format!("folds must be at least 2, got {}", options.folds)));
    }
    let m = db.dim();
    if ranking.abs_t_order.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: ranking.abs_t_order.len(),
        });
    }
    let data = db.binary(positive, negative)?;
    let folds = stratified_folds(&data.y, options.folds, options.seed)?;
    let sizes = options.sizes_for(m);

    let scores = sizes
        .par_iter()
        .map(|&q| {
            let cols = ranking.top(q);
            let summary = cross_validate(&data.columns(&cols), &settings.config_for(q), &folds)?;
            let acc = summary.mean_accuracy;
            let objective = acc - options.fp_penalty * summary.pooled.false_positive_rate();
            Ok((acc, objective))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.1 > scores[best].1 {
            best = i;
        }
    }
    let chosen_q = sizes[best];
    Ok(SelectionReport {
        cv_accuracy: scores.iter().map(|s| s.0).collect(),
        cv_objective: scores.iter().map(|s| s.1).collect(),
        candidate_sizes: sizes,
        fp_penalty: options.fp_penalty,
        folds: options.folds,
        chosen_q,
        chosen_indices: ranking.top(chosen_q),
        ranking: ranking.clone(),
    })
}

/// Keeps the selected columns of a scaled database.
pub fn project(db: &SignatureDatabase, indices: &[usize]) -> Result<SignatureDatabase> {
    db.project(indices)
}
