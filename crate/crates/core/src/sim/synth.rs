use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{FaultRegistry, Label, SignatureDatabase};
use crate::rng::SplitMix64;
use crate::signature::Signature;

/// Catalog version stamped on generated signatures.
pub const SYNTHETIC_CATALOG: &str = "synthetic";

const CLIP_MAX: f64 = 1e6;

/// Distribution of the features that carry no class information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    Constant(f64),
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, sd: f64 },
}

impl Noise {
    fn draw(&self, rng: &mut SplitMix64) -> f64 {
        match *self {
            Noise::Constant(v) => v,
            Noise::Uniform { lo, hi } => rng.uniform_in(lo, hi),
            Noise::Gaussian { mean, sd } => mean + sd * rng.gaussian(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Noise::Constant(v) => v.is_finite(),
            Noise::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            Noise::Gaussian { mean, sd } => mean.is_finite() && sd.is_finite() && sd >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid noise distribution {self:?}")))
        }
    }
}

/// Feature layout of one class: a few informative features sit near fixed
/// targets, the rest are noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassArtifactSpec {
    pub m: usize,
    /// `(feature index, target value)`.
    pub informative: Vec<(usize, f64)>,
    /// Standard deviation of the Gaussian jitter around each target.
    pub jitter: f64,
    pub noise: Noise,
    pub label: Option<Label>,
}

impl ClassArtifactSpec {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for &(j, t) in &self.informative {
            if j >= self.m {
                return Err(Error::IndexOutOfRange { index: j, m: self.m });
            }
            if !seen.insert(j) {
                return Err(Error::Config(format!("informative index {j} listed twice")));
            }
            if !t.is_finite() {
                return Err(Error::NonFiniteInput);
            }
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(Error::Config(format!("jitter must be non-negative, got {}", self.jitter)));
        }
        self.noise.validate()
    }

    /// Same layout with every target moved by `delta`.
    pub fn shifted(&self, delta: f64) -> Self {
        let mut s = self.clone();
        for (_, t) in &mut s.informative {
            *t += delta;
        }
        s
    }
}

/// One signature drawn from `spec`. Features consume random draws in index
/// order, so a seed fixes the whole vector.
pub fn generate_synthetic_signature(spec: &ClassArtifactSpec, seed: u64) -> Result<Signature> {
    spec.validate()?;
    let mut rng = SplitMix64::new(seed);
    let mut target = vec![None; spec.m];
    for &(j, t) in &spec.informative {
        target[j] = Some(t);
    }
    let values = target
        .iter()
        .map(|t| {
            let v = match t {
                Some(t) => t + spec.jitter * rng.gaussian(),
                None => spec.noise.draw(&mut rng),
            };
            v.clamp(0.0, CLIP_MAX)
        })
        .collect();
    Ok(Signature {
        values,
        label: spec.label,
        catalog_version: SYNTHETIC_CATALOG.to_string(),
    })
}

/// Labeled preliminary database holding `count` draws of each spec. Row `i`
/// of spec `c` uses its own stream, so adding classes leaves the others
/// unchanged.
pub fn synthetic_database(
    specs: &[(ClassArtifactSpec, usize)],
    seed: u64,
    fault_registry: FaultRegistry,
) -> Result<SignatureDatabase> {
    let m = specs.first().map_or(0, |(s, _)| s.m);
    let mut rows = Vec::new();
    for (c, (spec, count)) in specs.iter().enumerate() {
        if spec.m != m {
            return Err(Error::DimensionMismatch { expected: m, got: spec.m });
        }
        if spec.label.is_none() {
            return Err(Error::Config("synthetic database rows need a label".into()));
        }
        for i in 0..*count {
            let row_seed = SplitMix64::fork(seed, ((c as u64) << 32) | i as u64).next();
            rows.push(generate_synthetic_signature(spec, row_seed)?);
        }
    }
    let names = (0..m).map(|j| format!("f{j:03}")).collect();
    SignatureDatabase::preliminary(SYNTHETIC_CATALOG, names, rows, fault_registry)
}
