use serde::{Deserialize, Serialize};

use super::kernel::{gram_matrix, Kernel, KernelKind};
use super::solver::{self, DualSolution};
use crate::error::{Error, Result};
use crate::preprocess::Scaler;
use crate::scalar::Scalar;

/// Labeled training points, labels in `{+1, -1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F> {
    pub x: Vec<Vec<F>>,
    pub y: Vec<i8>,
}

impl<F> Default for Dataset<F> {
    fn default() -> Self {
        Dataset {
            x: Vec::new(),
            y: Vec::new(),
        }
    }
}

impl<F: Scalar> Dataset<F> {
    pub fn new(x: Vec<Vec<F>>, y: Vec<i8>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        if let Some(bad) = y.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::Config(format!("labels must be +1/-1, got {bad}")));
        }
        Ok(Dataset { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Dataset {
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }

    /// Keeps only the given columns, in order.
    pub fn columns(&self, cols: &[usize]) -> Self {
        Dataset {
            x: self
                .x
                .iter()
                .map(|r| cols.iter().map(|&c| r[c]).collect())
                .collect(),
            y: self.y.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "")]
pub struct Config<F: Scalar> {
    pub kernel: Kernel<F>,
    #[serde(rename = "C")]
    pub c: F,
    pub max_iter: usize,
    pub tol: F,
}

impl<F: Scalar> Config<F> {
    pub const DEFAULT_C: f64 = 10.0;
    pub const DEFAULT_TOL: f64 = 1e-3;

    pub fn new(kernel: Kernel<F>) -> Self {
        Config {
            kernel,
            c: F::from_f64_lossy(Self::DEFAULT_C),
            max_iter: 1000,
            tol: F::from_f64_lossy(Self::DEFAULT_TOL),
        }
    }

    pub fn with_c(mut self, c: F) -> Self {
        self.c = c;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_tol(mut self, tol: F) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.c > F::zero() && self.c.is_finite()) {
            return Err(Error::Config(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tol > F::zero()) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Solver settings with the kernel width left open until the input dimension
/// is known. `sigma: None` means the default width for that dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "")]
pub struct Settings<F: Scalar> {
    pub kernel: KernelKind,
    #[serde(default)]
    pub sigma: Option<F>,
    #[serde(rename = "C")]
    pub c: F,
    pub max_iter: usize,
    pub tol: F,
}

impl<F: Scalar> Settings<F> {
    pub fn new(kernel: KernelKind) -> Self {
        Settings {
            kernel,
            sigma: None,
            c: F::from_f64_lossy(Config::<F>::DEFAULT_C),
            max_iter: 1000,
            tol: F::from_f64_lossy(Config::<F>::DEFAULT_TOL),
        }
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_c(mut self, c: F) -> Self {
        self.c = c;
        self
    }

    /// Concrete configuration for `q`-dimensional inputs.
    pub fn config_for(&self, q: usize) -> Config<F> {
        let kernel = match (self.kernel, self.sigma) {
            (KernelKind::Rbf, Some(sigma)) => Kernel::Rbf { sigma },
            (kind, _) => Kernel::from_kind(kind, q, F::one()),
        };
        Config {
            kernel,
            c: self.c,
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrainingMeta<F: Scalar> {
    pub n: usize,
    pub iterations_used: usize,
    pub final_kkt_residual: F,
    pub converged: bool,
}

/// Kernel decision function `D(x) = sum_i c_i K(sv_i, x) + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Model<F: Scalar> {
    pub kernel: Kernel<F>,
    #[serde(rename = "C")]
    pub c: F,
    pub bias: F,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coef: Vec<F>,
    pub support_vectors: Vec<Vec<F>>,
    /// Columns of the scaled signature this model reads, in order.
    pub feature_subset: Vec<usize>,
    /// Scaler fitted on the full training signature, applied before projection.
    pub scaler: Option<Scaler<F>>,
    pub catalog_version: String,
    pub training_meta: TrainingMeta<F>,
}

/// A trained model together with the solver state that produced it.
#[derive(Debug, Clone)]
pub struct Fit<F: Scalar> {
    pub model: Model<F>,
    pub solution: DualSolution<F>,
}

impl<F: Scalar> Model<F> {
    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    pub fn converged(&self) -> bool {
        self.training_meta.converged
    }

    pub fn decision_value(&self, x: &[F]) -> Result<F> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coef)
            .fold(self.bias, |acc, (sv, &c)| {
                acc + c * self.kernel.eval_unchecked(sv, x)
            }))
    }

    pub fn classify(&self, x: &[F]) -> Result<i8> {
        self.decision_value(x).map(sign_of)
    }

    /// Scales (with clamping) and projects a full signature, then evaluates `D`.
    pub fn decision_value_raw(&self, raw: &[F]) -> Result<F> {
        let scaled = match &self.scaler {
            Some(s) => s.apply(raw)?,
            None => raw.to_vec(),
        };
        let projected = self
            .feature_subset
            .iter()
            .map(|&i| {
                scaled.get(i).copied().ok_or(Error::IndexOutOfRange {
                    index: i,
                    m: scaled.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.decision_value(&projected)
    }
}

/// Sign rule of the decision function; `D = 0` goes to +1.
pub fn sign_of<F: Scalar>(d: F) -> i8 {
    if d >= F::zero() {
        1
    } else {
        -1
    }
}

fn check_data<F: Scalar>(data: &Dataset<F>) -> Result<()> {
    if data.len() < 2 || !data.y.contains(&1) || !data.y.contains(&-1) {
        return Err(Error::SingleClassInput);
    }
    let q = data.dim();
    for r in &data.x {
        if r.len() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                got: r.len(),
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
    }
    Ok(())
}

/// Trains and keeps the solver state.
pub fn fit<F: Scalar>(data: &Dataset<F>, config: &Config<F>) -> Result<Fit<F>> {
    config.validate()?;
    check_data(data)?;
    let gram = gram_matrix(&config.kernel, &data.x, config.c);
    let solution = solver::solve(&gram, &data.y, config.max_iter, config.tol);
    let support = solution.support();
    let model = Model {
        kernel: config.kernel,
        c: config.c,
        bias: solution.bias,
        dual_coef: support
            .iter()
            .map(|&i| {
                if data.y[i] > 0 {
                    solution.alpha[i]
                } else {
                    -solution.alpha[i]
                }
            })
            .collect(),
        support_vectors: support.iter().map(|&i| data.x[i].clone()).collect(),
        feature_subset: (0..data.dim()).collect(),
        scaler: None,
        catalog_version: String::new(),
        training_meta: TrainingMeta {
            n: data.len(),
            iterations_used: solution.sweeps,
            final_kkt_residual: solution.kkt_residual,
            converged: solution.converged,
        },
    };
    Ok(Fit { model, solution })
}

pub fn train<F: Scalar>(data: &Dataset<F>, config: &Config<F>) -> Result<Model<F>> {
    fit(data, config).map(|f| f.model)
}

/// Largest KKT residual of a dual solution, recomputed through the kernel.
pub fn kkt_residual<F: Scalar>(
    data: &Dataset<F>,
    config: &Config<F>,
    alpha: &[F],
    bias: F,
) -> F {
    let n = data.len();
    let threshold = solver::support_threshold(alpha);
    let mut worst = F::zero();
    for i in 0..n {
        let mut d = bias;
        for j in 0..n {
            if alpha[j] > F::zero() {
                let yj = if data.y[j] > 0 { F::one() } else { -F::one() };
                d = d + alpha[j] * yj * config.kernel.eval_unchecked(&data.x[j], &data.x[i]);
            }
        }
        let yi = if data.y[i] > 0 { F::one() } else { -F::one() };
        let r = yi * d - F::one() + alpha[i] / config.c;
        worst = worst.max(solver::kkt_violation(r, alpha[i], threshold));
    }
    worst
}
