//! L2 soft-margin kernel SVM.

mod kernel;
mod model;
mod solver;

pub use kernel::{gram_matrix, Kernel, KernelKind, SymMatrix};
pub use model::{fit, kkt_residual, sign_of, train, Config, Dataset, Fit, Model, Settings, TrainingMeta};
pub use solver::{dual_objective, kkt_violation, solve, support_threshold, DualSolution};
