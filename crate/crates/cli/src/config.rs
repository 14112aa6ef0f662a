//! JSON configuration shared by all subcommands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use netdiag::cascade::StageConfig;
use netdiag::preprocess::FaultRegistry;
use netdiag::FeatureCatalog;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Bundle directory used when `--bundle`/`--output` is omitted.
    pub bundle: Option<PathBuf>,
    /// Database CSV used when `--db`/`--output` is omitted.
    pub database: Option<PathBuf>,
}

/// Everything a run can be configured with. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CliConfig {
    /// Feature catalog version used by `extract`.
    pub catalog: String,
    /// Seed for folds and simulations; `--seed` wins over it.
    pub seed: u64,
    /// Cross-validation folds for every stage.
    pub k: Option<usize>,
    /// Feature-count candidates for the link classifier.
    pub candidate_sizes: Option<Vec<usize>>,
    /// Name of the link classifier profile.
    pub profile: String,
    pub lpd: StageConfig,
    /// Per-fault module settings; faults left out use their defaults.
    pub cfd: BTreeMap<String, StageConfig>,
    pub faults: FaultRegistry,
    pub paths: Paths,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            catalog: FeatureCatalog::V1.to_string(),
            seed: 0,
            k: None,
            candidate_sizes: None,
            profile: "default".to_string(),
            lpd: StageConfig::lpd(),
            cfd: BTreeMap::new(),
            faults: FaultRegistry::standard(),
            paths: Paths::default(),
        }
    }
}

fn check_stage(name: &str, stage: &StageConfig) -> anyhow::Result<()> {
    stage.svm.config_for(1).validate().with_context(|| format!("stage {name}"))?;
    if stage.wrapper.folds < 2 {
        bail!("stage {name}: folds must be at least 2");
    }
    if stage.wrapper.candidate_sizes.contains(&0) {
        bail!("stage {name}: candidate sizes must be positive");
    }
    if let Some(g) = &stage.grid {
        if g.kernels.is_empty() || g.c_values.is_empty() {
            bail!("stage {name}: grid needs at least one kernel and one C value");
        }
        if g.c_values.iter().chain(&g.sigma_scales).any(|v| !(v.is_finite() && *v > 0.0)) {
            bail!("stage {name}: grid values must be positive");
        }
    }
    Ok(())
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let config = match path {
            None => CliConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        FeatureCatalog::by_version(&self.catalog)?;
        self.faults.validate()?;
        if self.profile.is_empty() {
            bail!("profile name must not be empty");
        }
        if let Some(k) = self.k {
            if k < 2 {
                bail!("k must be at least 2, got {k}");
            }
        }
        if let Some(sizes) = &self.candidate_sizes {
            if sizes.is_empty() || sizes.contains(&0) {
                bail!("candidate_sizes must be a non-empty list of positive sizes");
            }
        }
        check_stage("lpd", &self.lpd)?;
        for (name, stage) in &self.cfd {
            if self.faults.index_of(name).is_none() {
                bail!("cfd entry {name:?} is not a registered fault");
            }
            check_stage(name, stage)?;
        }
        Ok(())
    }

    fn finish(&self, mut stage: StageConfig, seed: u64) -> StageConfig {
        if let Some(k) = self.k {
            stage.wrapper.folds = k;
        }
        stage.with_seed(seed)
    }

    pub fn lpd_stage(&self, seed: u64) -> StageConfig {
        let mut stage = self.lpd.clone();
        if let Some(sizes) = &self.candidate_sizes {
            stage.wrapper.candidate_sizes = sizes.clone();
        }
        self.finish(stage, seed)
    }

    /// One module config per fault in `registry`.
    pub fn cf_stages(&self, registry: &FaultRegistry, seed: u64) -> BTreeMap<String, StageConfig> {
        registry
            .faults()
            .into_iter()
            .map(|(_, name)| {
                let stage = self
                    .cfd
                    .get(&name)
                    .cloned()
                    .or_else(|| StageConfig::cf_default(&name))
                    .unwrap_or_else(StageConfig::cf_fallback);
                (name, self.finish(stage, seed))
            })
            .collect()
    }
}
