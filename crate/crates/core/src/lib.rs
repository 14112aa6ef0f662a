//! Diagnosis of end-to-end TCP performance problems from packet traces.
//!
//! A pair of bidirectional traces (a download captured at the client and an
//! upload captured at the server) is reduced to a fixed-length statistical
//! signature. A link classifier decides whether the access link is faulty;
//! only when it is healthy does a parallel network of per-fault binary
//! classifiers look for client-side misconfigurations.
//!
//! The numerical pieces (kernels, the dual solver, min-max scaling and the
//! t-test filter) are generic over [`Scalar`]; the pipeline itself works in
//! `f64` and the aliases below name the concrete instantiations.

pub mod cascade;
pub mod error;
pub mod eval;
pub mod preprocess;
pub mod rng;
pub mod scalar;
pub mod select;
pub mod signature;
pub mod sim;
pub mod svm;
pub mod trace;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Trained SVM decision function in double precision.
pub type SvmModel = svm::Model<f64>;
/// Trained SVM decision function in single precision.
pub type SvmModel32 = svm::Model<f32>;
/// Solver configuration in double precision.
pub type SvmConfig = svm::Config<f64>;
/// Per-feature min/max scaler in double precision.
pub type ScalerParams = preprocess::Scaler<f64>;
/// Kernel choice in double precision.
pub type KernelSpec = svm::Kernel<f64>;

pub use cascade::{CfModule, CfdNetwork, LpdClassifier, Verdict};
pub use preprocess::{Label, SignatureDatabase, Stage};
pub use signature::{FeatureCatalog, Signature};
pub use trace::{PacketEvent, TracePair, TraceRecord};
