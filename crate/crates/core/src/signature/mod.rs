//! Signature extraction: a trace pair becomes an m-dimensional feature vector.

mod catalog;
mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use catalog::{FeatureCatalog, FeatureDef, Statistic, TraceRole};
pub use stats::{compute_statistic, TraceSummary, SMALL_SEGMENT_BYTES};

use crate::error::{Error, Result};
use crate::preprocess::Label;
use crate::trace::TracePair;

/// Feature vector of one trace pair, optionally carrying its class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    pub values: Vec<f64>,
    pub label: Option<Label>,
    pub catalog_version: String,
}

impl Signature {
    pub fn with_label(mut self, label: Label) -> Self {
        self.label = Some(label);
        self
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Which features were defined for the traces they came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionDiagnostics {
    pub defined: Vec<bool>,
}

impl ExtractionDiagnostics {
    pub fn undefined_count(&self) -> usize {
        self.defined.iter().filter(|d| !**d).count()
    }
}

pub fn extract_signature(pair: &TracePair, catalog: &FeatureCatalog) -> Result<Signature> {
    extract_with_diagnostics(pair, catalog).map(|(s, _)| s)
}

pub fn extract_with_diagnostics(
    pair: &TracePair,
    catalog: &FeatureCatalog,
) -> Result<(Signature, ExtractionDiagnostics)> {
    pair.check_roles()?;
    if pair.download.events().is_empty() || pair.upload.events().is_empty() {
        return Err(Error::EmptyTrace);
    }
    let down = TraceSummary::new(&pair.download);
    let up = TraceSummary::new(&pair.upload);
    let mut values = Vec::with_capacity(catalog.len());
    let mut defined = Vec::with_capacity(catalog.len());
    for f in catalog.features() {
        let (summary, trace) = match f.trace {
            TraceRole::Download => (&down, &pair.download),
            TraceRole::Upload => (&up, &pair.upload),
        };
        let v = summary
            .get(f.statistic, trace.data_direction())
            .filter(|v| v.is_finite());
        defined.push(v.is_some());
        values.push(v.unwrap_or(0.0));
    }
    Ok((
        Signature {
            values,
            label: None,
            catalog_version: catalog.version().to_string(),
        },
        ExtractionDiagnostics { defined },
    ))
}

/// Extracts many pairs in parallel, preserving input order.
pub fn extract_many(pairs: &[TracePair], catalog: &FeatureCatalog) -> Result<Vec<Signature>> {
    pairs
        .par_iter()
        .map(|p| extract_signature(p, catalog))
        .collect()
}
