//! Two-stage diagnosis: a link classifier gates a parallel network of
//! per-fault client classifiers.
//!
//! Every classifier carries its own scaler and feature subset, so a single
//! extracted signature feeds all of them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{select_model, GridResult, GridSpec};
use crate::preprocess::{FaultRegistry, Label, LinkClass, SignatureDatabase, Stage};
use crate::select::{rank_features, wrapper_select, SelectionReport, WrapperOptions};
use crate::signature::{extract_signature, FeatureCatalog};
use crate::svm::{self, KernelKind, Settings};
use crate::trace::TracePair;
use crate::SvmModel;

/// Training recipe for one binary classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StageConfig {
    pub svm: Settings<f64>,
    pub wrapper: WrapperOptions,
    /// Welch's t-test instead of the pooled-variance one.
    pub welch: bool,
    /// When set, kernel, C and sigma are chosen by CV on the selected features.
    pub grid: Option<GridSpec>,
}

impl Default for StageConfig {
    fn default() -> Self {
        StageConfig::lpd()
    }
}

impl StageConfig {
    /// Link classifier: quadratic kernel, 1000 sweeps, full size grid.
    pub fn lpd() -> Self {
        StageConfig {
            svm: Settings::new(KernelKind::Quadratic).with_max_iter(1000),
            wrapper: WrapperOptions::default(),
            welch: false,
            grid: None,
        }
    }

    /// Client-fault module with a fixed kernel and feature count.
    pub fn cf(kernel: KernelKind, features: usize) -> Self {
        StageConfig {
            svm: Settings::new(kernel).with_max_iter(2000),
            wrapper: WrapperOptions {
                candidate_sizes: vec![features],
                fp_penalty: 1.0,
                ..WrapperOptions::default()
            },
            welch: false,
            grid: None,
        }
    }

    /// Defaults for the four standard client faults.
    pub fn cf_default(fault: &str) -> Option<Self> {
        Some(match fault {
            "sack_disabled" => StageConfig::cf(KernelKind::Linear, 12),
            "dsack_disabled" => StageConfig::cf(KernelKind::Rbf, 32),
            "read_buf" => StageConfig::cf(KernelKind::Cubic, 24),
            "write_buf" => StageConfig::cf(KernelKind::Rbf, 16),
            _ => return None,
        })
    }

    /// Module defaults for faults without a dedicated entry.
    pub fn cf_fallback() -> Self {
        StageConfig {
            wrapper: WrapperOptions {
                fp_penalty: 1.0,
                ..WrapperOptions::default()
            },
            ..StageConfig::cf(KernelKind::Rbf, 0)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.wrapper.seed = seed;
        self
    }
}

/// Model plus the selection that fed it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedStage {
    pub model: SvmModel,
    pub selection: SelectionReport,
    pub grid: Option<GridResult>,
}

/// scale, rank, select, project, (grid), train on a preliminary database.
pub fn train_stage(
    db: &SignatureDatabase,
    positive: Label,
    negative: Label,
    config: &StageConfig,
) -> Result<TrainedStage> {
    if db.stage != Stage::Preliminary {
        return Err(Error::StageMismatch {
            expected: Stage::Preliminary.name(),
            found: db.stage.name(),
        });
    }
    let rows: Vec<usize> = db
        .labels()
        .enumerate()
        .filter(|(_, l)| *l == positive || *l == negative)
        .map(|(i, _)| i)
        .collect();
    let db = db.subset(&rows);
    let scaler = db.fit_scaler()?;
    let ssd = db.scaled(&scaler)?;
    let ranking = rank_features(&ssd, positive, negative, config.welch)?;
    let selection = wrapper_select(&ssd, &ranking, positive, negative, &config.wrapper, &config.svm)?;
    let osd = ssd.project(&selection.chosen_indices)?;
    let data = osd.binary(positive, negative)?;
    let q = selection.chosen_q;
    let (svm_config, grid) = match &config.grid {
        Some(spec) => {
            let g = select_model(&data, spec, &config.svm, config.wrapper.folds, config.wrapper.seed)?;
            (g.best_config(q, &config.svm), Some(g))
        }
        None => (config.svm.config_for(q), None),
    };
    let mut model = svm::train(&data, &svm_config)?;
    if !model.converged() {
        log::warn!(
            "{positive} vs {negative}: solver stopped after {} sweeps without converging",
            model.training_meta.iterations_used
        );
    }
    model.feature_subset = selection.chosen_indices.clone();
    model.scaler = Some(scaler);
    model.catalog_version = db.catalog_version.clone();
    Ok(TrainedStage {
        model,
        selection,
        grid,
    })
}

/// Link classifier for one link profile.
#[derive(Debug, Clone, PartialEq)]
pub struct LpdClassifier {
    pub profile: String,
    pub model: SvmModel,
    pub selection: SelectionReport,
}

impl LpdClassifier {
    pub fn stage_name(&self) -> String {
        format!("lpd:{}", self.profile)
    }
}

/// Trains the link classifier on a database with faulty/healthy link labels.
pub fn train_lpd(psd: &SignatureDatabase, profile: &str, config: &StageConfig) -> Result<LpdClassifier> {
    if psd.count(Label::FAULTY) == 0 || psd.count(Label::HEALTHY_LINK) == 0 {
        return Err(Error::SingleClassInput);
    }
    let t = train_stage(psd, Label::FAULTY, Label::HEALTHY_LINK, config)?;
    Ok(LpdClassifier {
        profile: profile.to_string(),
        model: t.model,
        selection: t.selection,
    })
}

/// One binary client-fault classifier (`cf_j` against `cf_0`).
#[derive(Debug, Clone, PartialEq)]
pub struct CfModule {
    pub fault_index: usize,
    pub fault_name: String,
    pub model: SvmModel,
    pub selection: SelectionReport,
}

impl CfModule {
    pub fn stage_name(&self) -> String {
        format!("cf:{}", self.fault_name)
    }
}

pub fn train_cf_module(cfd_db: &SignatureDatabase, j: usize, config: &StageConfig) -> Result<CfModule> {
    let name = cfd_db
        .fault_registry
        .name_of(j)
        .ok_or_else(|| Error::Config(format!("fault index {j} is not registered")))?
        .to_string();
    let subset = cfd_db.cf_subset(j)?;
    let t = train_stage(&subset, Label::Client(j), Label::HEALTHY_CLIENT, config)?;
    Ok(CfModule {
        fault_index: j,
        fault_name: name,
        model: t.model,
        selection: t.selection,
    })
}

/// Parallel network of client-fault modules, ordered by fault index.
#[derive(Debug, Clone, PartialEq)]
pub struct CfdNetwork {
    pub modules: Vec<CfModule>,
    pub fault_registry: FaultRegistry,
}

impl CfdNetwork {
    pub fn new(mut modules: Vec<CfModule>, fault_registry: FaultRegistry) -> Result<Self> {
        fault_registry.validate()?;
        modules.sort_by_key(|m| m.fault_index);
        for w in modules.windows(2) {
            if w[0].fault_index == w[1].fault_index {
                return Err(Error::Config(format!("two modules for fault index {}", w[0].fault_index)));
            }
        }
        for m in &modules {
            if fault_registry.index_of(&m.fault_name) != Some(m.fault_index) {
                return Err(Error::Config(format!(
                    "module {} (cf_{}) is not in the fault registry",
                    m.fault_name, m.fault_index
                )));
            }
        }
        Ok(CfdNetwork {
            modules,
            fault_registry,
        })
    }

    /// Adds or replaces one module, leaving the others untouched.
    pub fn insert(&mut self, module: CfModule) -> Result<()> {
        if self.fault_registry.index_of(&module.fault_name).is_none() {
            self.fault_registry.insert(module.fault_name.clone(), module.fault_index)?;
        }
        self.modules.retain(|m| m.fault_index != module.fault_index);
        self.modules.push(module);
        self.modules.sort_by_key(|m| m.fault_index);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.modules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modules.is_empty()
    }
}

/// Trains one module per registered fault. Missing entries in `configs`
/// fall back to the standard per-fault defaults.
pub fn train_cfd(cfd_db: &SignatureDatabase, configs: &BTreeMap<String, StageConfig>) -> Result<CfdNetwork> {
    let faults = cfd_db.fault_registry.faults();
    if faults.is_empty() {
        return Err(Error::Config("fault registry is empty".into()));
    }
    let modules = faults
        .par_iter()
        .map(|(j, name)| {
            let config = configs
                .get(name)
                .cloned()
                .or_else(|| StageConfig::cf_default(name))
                .unwrap_or_else(StageConfig::cf_fallback);
            train_cf_module(cfd_db, *j, &config).map_err(|e| e.in_module(name))
        })
        .collect::<Result<Vec<_>>>()?;
    CfdNetwork::new(modules, cfd_db.fault_registry.clone())
}

/// Names of the modules that voted +1.
pub fn cfd_collective<'a>(decisions: impl IntoIterator<Item = (&'a str, i8)>) -> BTreeSet<String> {
    decisions
        .into_iter()
        .filter(|&(_, class)| class > 0)
        .map(|(name, _)| name.to_string())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkStatus {
    Faulty,
    Healthy,
}

impl From<LinkClass> for LinkStatus {
    fn from(c: LinkClass) -> Self {
        match c {
            LinkClass::Faulty => LinkStatus::Faulty,
            LinkClass::Healthy => LinkStatus::Healthy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PipelineNote {
    LinkFaultStop,
    FullDiagnosis,
}

/// One classifier's output inside a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub stage: String,
    #[serde(rename = "D")]
    pub d: f64,
    pub class: i8,
}

/// Final diagnosis of one trace pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub link: LinkStatus,
    pub client_faults: BTreeSet<String>,
    pub decisions: Vec<Decision>,
    pub pipeline_note: PipelineNote,
}

impl Verdict {
    pub fn new(link: LinkStatus, client_faults: BTreeSet<String>, decisions: Vec<Decision>) -> Self {
        let pipeline_note = match link {
            LinkStatus::Faulty => PipelineNote::LinkFaultStop,
            LinkStatus::Healthy => PipelineNote::FullDiagnosis,
        };
        Verdict {
            link,
            client_faults,
            decisions,
            pipeline_note,
        }
    }

    /// 0 healthy, 10 faulty link, 20 client fault(s).
    pub fn exit_code(&self) -> i32 {
        match (self.link, self.client_faults.is_empty()) {
            (LinkStatus::Faulty, _) => 10,
            (LinkStatus::Healthy, true) => 0,
            (LinkStatus::Healthy, false) => 20,
        }
    }

    pub fn summary(&self) -> String {
        match (self.link, self.client_faults.is_empty()) {
            (LinkStatus::Faulty, _) => "link FAULTY; client diagnosis skipped".to_string(),
            (LinkStatus::Healthy, true) => "link healthy; client healthy".to_string(),
            (LinkStatus::Healthy, false) => format!(
                "link healthy; client faults: {}",
                self.client_faults.iter().cloned().collect::<Vec<_>>().join(", ")
            ),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.summary())
    }
}

/// Runs the cascade on one raw (unscaled, full-length) signature.
pub fn diagnose_values(lpd: Option<&LpdClassifier>, cfd: &CfdNetwork, x: &[f64]) -> Result<Verdict> {
    let mut decisions = Vec::with_capacity(cfd.len() + 1);
    if let Some(lpd) = lpd {
        let d = lpd.model.decision_value_raw(x)?;
        let class = svm::sign_of(d);
        decisions.push(Decision {
            stage: lpd.stage_name(),
            d,
            class,
        });
        if class > 0 {
            return Ok(Verdict::new(LinkStatus::Faulty, BTreeSet::new(), decisions));
        }
    }
    let cf = cfd
        .modules
        .par_iter()
        .map(|m| {
            let d = m.model.decision_value_raw(x).map_err(|e| e.in_module(&m.fault_name))?;
            Ok(Decision {
                stage: m.stage_name(),
                d,
                class: svm::sign_of(d),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let faults = cfd_collective(cfd.modules.iter().zip(&cf).map(|(m, d)| (m.fault_name.as_str(), d.class)));
    decisions.extend(cf);
    Ok(Verdict::new(LinkStatus::Healthy, faults, decisions))
}

/// Catalog shared by every model of a bundle.
pub fn bundle_catalog(lpd: &LpdClassifier, cfd: &CfdNetwork) -> Result<FeatureCatalog> {
    let version = &lpd.model.catalog_version;
    for m in &cfd.modules {
        if &m.model.catalog_version != version {
            return Err(Error::CatalogMismatch(format!(
                "link model uses {version:?}, module {} uses {:?}",
                m.fault_name, m.model.catalog_version
            )));
        }
    }
    FeatureCatalog::by_version(version)
}

/// Extracts the signature once and runs the cascade.
pub fn diagnose(lpd: &LpdClassifier, cfd: &CfdNetwork, pair: &TracePair) -> Result<Verdict> {
    let catalog = bundle_catalog(lpd, cfd)?;
    let sig = extract_signature(pair, &catalog)?;
    diagnose_values(Some(lpd), cfd, &sig.values)
}

/// Index file at the root of a bundle directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleIndex {
    pub catalog_version: Option<String>,
    pub lpd_profiles: Vec<String>,
    pub fault_registry: FaultRegistry,
    /// Fault names that have a trained module.
    pub cf_modules: Vec<String>,
}

/// Everything a bundle directory holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub lpd: BTreeMap<String, LpdClassifier>,
    pub cfd: CfdNetwork,
}

impl Bundle {
    pub fn empty() -> Self {
        Bundle {
            lpd: BTreeMap::new(),
            cfd: CfdNetwork {
                modules: Vec::new(),
                fault_registry: FaultRegistry::default(),
            },
        }
    }

    /// The named link profile, or the only one when `profile` is `None`.
    pub fn lpd(&self, profile: Option<&str>) -> Result<&LpdClassifier> {
        match profile {
            Some(p) => self
                .lpd
                .get(p)
                .ok_or_else(|| Error::Config(format!("bundle has no link profile {p:?}"))),
            None if self.lpd.len() == 1 => Ok(self.lpd.values().next().expect("one profile")),
            None if self.lpd.is_empty() => Err(Error::Config("bundle has no link classifier".into())),
            None => Err(Error::Config(format!(
                "bundle has several link profiles ({}); pick one",
                self.lpd.keys().cloned().collect::<Vec<_>>().join(", ")
            ))),
        }
    }

    fn index(&self) -> Result<BundleIndex> {
        let mut versions: BTreeSet<&str> = self.lpd.values().map(|l| l.model.catalog_version.as_str()).collect();
        versions.extend(self.cfd.modules.iter().map(|m| m.model.catalog_version.as_str()));
        if versions.len() > 1 {
            return Err(Error::CatalogMismatch(format!(
                "bundle mixes catalogs {}",
                versions.into_iter().collect::<Vec<_>>().join(", ")
            )));
        }
        Ok(BundleIndex {
            catalog_version: versions.into_iter().next().map(str::to_string),
            lpd_profiles: self.lpd.keys().cloned().collect(),
            fault_registry: self.cfd.fault_registry.clone(),
            cf_modules: self.cfd.modules.iter().map(|m| m.fault_name.clone()).collect(),
        })
    }
}

pub const INDEX_FILE: &str = "registry.json";

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("bundle types serialize");
    s.push('\n');
    s
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
        return Err(Error::Config(format!("{name:?} cannot be used as a file name")));
    }
    Ok(())
}

/// Writes a bundle directory. The tree is built next to `dir` and renamed
/// into place, so readers see either the old or the new bundle.
pub fn write_bundle(bundle: &Bundle, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let index = bundle.index()?;
    let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let base = dir.file_name().and_then(|n| n.to_str()).unwrap_or("bundle");
    let tmp = parent.join(format!(".{base}.tmp-{}", std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    let build = || -> Result<()> {
        for sub in ["lpd", "cfd"] {
            let p = tmp.join(sub);
            fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        for (profile, lpd) in &bundle.lpd {
            check_name(profile)?;
            write_json(&tmp.join("lpd").join(format!("{profile}.model.json")), &lpd.model)?;
            write_json(&tmp.join("lpd").join(format!("{profile}.selection.json")), &lpd.selection)?;
        }
        for m in &bundle.cfd.modules {
            check_name(&m.fault_name)?;
            write_json(&tmp.join("cfd").join(format!("{}.model.json", m.fault_name)), &m.model)?;
            write_json(&tmp.join("cfd").join(format!("{}.selection.json", m.fault_name)), &m.selection)?;
        }
        write_json(&tmp.join(INDEX_FILE), &index)
    };
    if let Err(e) = build() {
        let _ = fs::remove_dir_all(&tmp);
        return Err(e);
    }
    let old = parent.join(format!(".{base}.old-{}", std::process::id()));
    let had_old = dir.exists();
    if had_old {
        fs::rename(dir, &old).map_err(|e| Error::io(dir, e))?;
    }
    fs::rename(&tmp, dir).map_err(|e| Error::io(dir, e))?;
    if had_old {
        fs::remove_dir_all(&old).map_err(|e| Error::io(&old, e))?;
    }
    Ok(())
}

fn stage_paths(dir: &Path, sub: &str, name: &str) -> (PathBuf, PathBuf) {
    (
        dir.join(sub).join(format!("{name}.model.json")),
        dir.join(sub).join(format!("{name}.selection.json")),
    )
}

/// Reads a bundle written by [`write_bundle`].
pub fn read_bundle(dir: impl AsRef<Path>) -> Result<Bundle> {
    let dir = dir.as_ref();
    let index: BundleIndex = read_json(&dir.join(INDEX_FILE))?;
    index.fault_registry.validate()?;
    let mut lpd = BTreeMap::new();
    for profile in &index.lpd_profiles {
        check_name(profile)?;
        let (model, selection) = stage_paths(dir, "lpd", profile);
        lpd.insert(
            profile.clone(),
            LpdClassifier {
                profile: profile.clone(),
                model: read_json(&model)?,
                selection: read_json(&selection)?,
            },
        );
    }
    let mut modules = Vec::new();
    for name in &index.cf_modules {
        check_name(name)?;
        let fault_index = index
            .fault_registry
            .index_of(name)
            .ok_or_else(|| Error::Config(format!("module {name} missing from the registry")))?;
        let (model, selection) = stage_paths(dir, "cfd", name);
        modules.push(CfModule {
            fault_index,
            fault_name: name.clone(),
            model: read_json(&model)?,
            selection: read_json(&selection)?,
        });
    }
    let bundle = Bundle {
        lpd,
        cfd: CfdNetwork::new(modules, index.fault_registry)?,
    };
    if let Some(v) = &index.catalog_version {
        let mismatch = bundle
            .lpd
            .values()
            .map(|l| &l.model.catalog_version)
            .chain(bundle.cfd.modules.iter().map(|m| &m.model.catalog_version))
            .find(|c| *c != v);
        if let Some(c) = mismatch {
            return Err(Error::CatalogMismatch(format!("bundle index says {v:?}, a model says {c:?}")));
        }
    }
    Ok(bundle)
}

/// Serialized bytes of one module's model file, for modularity checks.
pub fn model_json(model: &SvmModel) -> String {
    to_json(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::Signature;

    fn sig(values: Vec<f64>, label: Label) -> Signature {
        Signature {
            values,
            label: Some(label),
            catalog_version: "t".into(),
        }
    }

    /// Client database where fault j raises feature j-1 and healthy rows sit low.
    fn client_db(per_class: usize) -> SignatureDatabase {
        let mut rng = crate::rng::SplitMix64::new(3);
        let mut rows = Vec::new();
        for class in 0..=2usize {
            for _ in 0..per_class {
                let mut v: Vec<f64> = (0..6).map(|_| rng.uniform()).collect();
                v[0] = 0.1 * rng.uniform();
                v[1] = 0.1 * rng.uniform();
                if class > 0 {
                    v[class - 1] = 0.9 + 0.1 * rng.uniform();
                }
                rows.push(sig(v, Label::Client(class)));
            }
        }
        let reg = FaultRegistry::new([("alpha".to_string(), 1), ("beta".to_string(), 2)]).unwrap();
        SignatureDatabase::preliminary("t", (0..6).map(|i| format!("x{i}")).collect(), rows, reg).unwrap()
    }

    fn small_cf(kernel: KernelKind) -> StageConfig {
        StageConfig::cf(kernel, 2)
    }

    fn network() -> CfdNetwork {
        let db = client_db(10);
        let configs = BTreeMap::from([
            ("alpha".to_string(), small_cf(KernelKind::Linear)),
            ("beta".to_string(), small_cf(KernelKind::Linear)),
        ]);
        train_cfd(&db, &configs).unwrap()
    }

    fn link_classifier() -> LpdClassifier {
        let mut rng = crate::rng::SplitMix64::new(5);
        let rows = (0..20)
            .map(|i| {
                let faulty = i % 2 == 0;
                let mut v: Vec<f64> = (0..6).map(|_| rng.uniform()).collect();
                v[5] = if faulty { 5.0 } else { 1.0 } + rng.uniform();
                sig(v, if faulty { Label::FAULTY } else { Label::HEALTHY_LINK })
            })
            .collect();
        let db = SignatureDatabase::preliminary("t", (0..6).map(|i| format!("x{i}")).collect(), rows, FaultRegistry::default())
            .unwrap();
        let mut cfg = StageConfig::lpd();
        cfg.wrapper.candidate_sizes = vec![1, 3];
        train_lpd(&db, "wired", &cfg).unwrap()
    }

    #[test]
    fn standard_module_defaults() {
        let c = StageConfig::cf_default("sack_disabled").unwrap();
        assert_eq!((c.svm.kernel, c.wrapper.candidate_sizes.clone(), c.svm.max_iter), (KernelKind::Linear, vec![12], 2000));
        let c = StageConfig::cf_default("read_buf").unwrap();
        assert_eq!((c.svm.kernel, c.wrapper.candidate_sizes.clone()), (KernelKind::Cubic, vec![24]));
        assert_eq!(StageConfig::lpd().svm.kernel, KernelKind::Quadratic);
        assert_eq!(StageConfig::lpd().svm.max_iter, 1000);
    }

    #[test]
    fn collective_is_any_positive() {
        assert!(cfd_collective([("a", -1), ("b", -1)]).is_empty());
        let both = cfd_collective([("read_buf", 1), ("write_buf", 1), ("sack_disabled", -1)]);
        assert_eq!(both, BTreeSet::from(["read_buf".to_string(), "write_buf".to_string()]));
        let one = cfd_collective([("sack_disabled", -1), ("dsack_disabled", 1)]);
        assert_eq!(one, BTreeSet::from(["dsack_disabled".to_string()]));
    }

    #[test]
    fn modules_detect_their_fault() {
        let net = network();
        assert_eq!(net.len(), 2);
        let healthy = [0.05, 0.05, 0.5, 0.5, 0.5, 0.5];
        let alpha = [0.95, 0.05, 0.5, 0.5, 0.5, 0.5];
        let v = diagnose_values(None, &net, &healthy).unwrap();
        assert!(v.client_faults.is_empty());
        let v = diagnose_values(None, &net, &alpha).unwrap();
        assert_eq!(v.client_faults, BTreeSet::from(["alpha".to_string()]));
        assert_eq!(v.exit_code(), 20);
        assert_eq!(v.decisions.len(), 2);
    }

    #[test]
    fn gate_skips_client_stage() {
        let lpd = link_classifier();
        let net = network();
        let faulty = [0.5, 0.5, 0.5, 0.5, 0.5, 5.5];
        let v = diagnose_values(Some(&lpd), &net, &faulty).unwrap();
        assert_eq!(v.link, LinkStatus::Faulty);
        assert_eq!(v.pipeline_note, PipelineNote::LinkFaultStop);
        assert_eq!(v.decisions.len(), 1);
        assert_eq!(v.decisions[0].stage, "lpd:wired");
        assert_eq!(v.exit_code(), 10);
        let ok = [0.05, 0.05, 0.5, 0.5, 0.5, 1.5];
        let v = diagnose_values(Some(&lpd), &net, &ok).unwrap();
        assert_eq!(v.pipeline_note, PipelineNote::FullDiagnosis);
        assert_eq!(v.decisions.len(), 3);
        assert_eq!(v.exit_code(), 0);
    }

    #[test]
    fn module_order_does_not_matter() {
        let net = network();
        let mut rev = net.clone();
        rev.modules.reverse();
        let x = [0.95, 0.95, 0.5, 0.5, 0.5, 0.5];
        let a = diagnose_values(None, &net, &x).unwrap();
        let b = diagnose_values(None, &rev, &x).unwrap();
        assert_eq!(a.client_faults, b.client_faults);
    }

    #[test]
    fn single_class_link_db() {
        let rows = (0..4).map(|i| sig(vec![i as f64], Label::FAULTY)).collect();
        let db = SignatureDatabase::preliminary("t", vec!["x".into()], rows, FaultRegistry::default()).unwrap();
        assert!(matches!(train_lpd(&db, "p", &StageConfig::lpd()), Err(Error::SingleClassInput)));
    }

    #[test]
    fn empty_registry_rejected() {
        let rows = (0..4).map(|i| sig(vec![i as f64], Label::HEALTHY_CLIENT)).collect();
        let db = SignatureDatabase::preliminary("t", vec!["x".into()], rows, FaultRegistry::default()).unwrap();
        assert!(matches!(train_cfd(&db, &BTreeMap::new()), Err(Error::Config(_))));
    }

    #[test]
    fn missing_fault_rows() {
        let db = client_db(6);
        let reg = FaultRegistry::new([("alpha".to_string(), 1), ("gamma".to_string(), 3)]).unwrap();
        let db = SignatureDatabase { fault_registry: reg, ..db };
        assert!(matches!(train_cf_module(&db, 3, &small_cf(KernelKind::Linear)), Err(Error::MissingClass(_))));
        let err = train_cfd(&db, &BTreeMap::new()).unwrap_err();
        assert!(err.to_string().contains("gamma"), "{err}");
    }

    #[test]
    fn bundle_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bundle");
        let mut b = Bundle::empty();
        let lpd = link_classifier();
        b.lpd.insert(lpd.profile.clone(), lpd);
        b.cfd = network();
        write_bundle(&b, &path).unwrap();
        assert!(path.join("lpd/wired.model.json").exists());
        assert!(path.join("cfd/alpha.model.json").exists());
        let back = read_bundle(&path).unwrap();
        assert_eq!(back, b);
        // rewriting replaces the directory in place
        write_bundle(&back, &path).unwrap();
        assert_eq!(read_bundle(&path).unwrap(), b);
        let leftovers: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }

    #[test]
    fn verdict_json_shape() {
        let v = Verdict::new(
            LinkStatus::Healthy,
            BTreeSet::from(["sack_disabled".to_string()]),
            vec![Decision { stage: "lpd:x".into(), d: -0.5, class: -1 }],
        );
        let j = serde_json::to_value(&v).unwrap();
        assert_eq!(j["link"], "healthy");
        assert_eq!(j["client_faults"][0], "sack_disabled");
        assert_eq!(j["decisions"][0]["D"], -0.5);
        assert_eq!(j["decisions"][0]["class"], -1);
        assert_eq!(j["pipeline_note"], "FullDiagnosis");
    }
}
