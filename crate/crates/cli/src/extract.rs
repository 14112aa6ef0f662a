use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use netdiag::preprocess::{encode_label, read_database, write_database, Stage};
use netdiag::signature::extract_signature;
use netdiag::{Error, FeatureCatalog, Signature, SignatureDatabase};
use rayon::prelude::*;
use serde::Serialize;

use crate::exit::{self, OrExit, Outcome};
use crate::files::{discover_pairs, read_labels, PairFiles};
use crate::{emit, Ctx, StageArg};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Trace directories (`<id>.down.csv` + `<id>.up.csv`) or existing
    /// database CSVs to merge.
    #[arg(long = "input", short, required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    /// `id,label` file; required for trace directories. Pairs without a
    /// label are skipped.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Which classifier the labels are for.
    #[arg(long)]
    stage: StageArg,
    /// Database CSV to write; a `.meta.json` sidecar goes next to it.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Serialize)]
struct Summary<'a> {
    output: &'a Path,
    rows: usize,
    features: usize,
    catalog_version: &'a str,
}

fn is_database(path: &Path) -> bool {
    path.is_file()
}

/// Appends `other` to `into`, which must describe the same feature space.
fn merge(into: &mut Option<SignatureDatabase>, other: SignatureDatabase, path: &Path) -> anyhow::Result<()> {
    if other.stage != Stage::Preliminary {
        bail!("{}: database is {}, only preliminary databases can be merged", path.display(), other.stage.name());
    }
    let Some(db) = into else {
        *into = Some(other);
        return Ok(());
    };
    if db.catalog_version != other.catalog_version {
        return Err(Error::CatalogMismatch(format!(
            "{} uses catalog {:?}, earlier inputs use {:?}",
            path.display(),
            other.catalog_version,
            db.catalog_version
        ))
        .into());
    }
    if db.feature_names != other.feature_names {
        bail!("{}: feature columns differ from earlier inputs", path.display());
    }
    if db.fault_registry != other.fault_registry {
        bail!("{}: fault registry differs from earlier inputs", path.display());
    }
    db.rows.extend(other.rows);
    Ok(())
}

pub fn run(ctx: &Ctx, args: Args) -> Outcome {
    let output = args
        .output
        .or_else(|| ctx.config.paths.database.clone())
        .ok_or_else(|| exit::usage("no output path: pass --output or set paths.database"))?;
    let kind = args.stage.kind();
    let registry = &ctx.config.faults;
    let catalog = FeatureCatalog::by_version(&ctx.config.catalog).or_exit(exit::USAGE)?;

    let (db_inputs, dir_inputs): (Vec<&PathBuf>, Vec<&PathBuf>) = args.inputs.iter().partition(|p| is_database(p));
    let mut pairs: BTreeMap<String, PairFiles> = BTreeMap::new();
    for dir in &dir_inputs {
        for (id, files) in discover_pairs(dir).or_exit(exit::USAGE)? {
            if let Some(prev) = pairs.insert(id.clone(), files) {
                return Err(exit::usage(format!(
                    "pair id {id:?} appears twice ({} and {})",
                    prev.download.display(),
                    dir.display()
                )));
            }
        }
    }

    let mut labeled = Vec::new();
    if !dir_inputs.is_empty() {
        let path = args
            .labels
            .as_deref()
            .ok_or_else(|| exit::usage("--labels is required for trace directories"))?;
        let labels = read_labels(path).or_exit(exit::USAGE)?;
        for (id, (line, tag)) in &labels {
            let files = pairs
                .get(id)
                .ok_or_else(|| exit::usage(format!("{}: line {line}: no trace pair for id {id:?}", path.display())))?;
            let label = encode_label(tag, kind, registry)
                .with_context(|| format!("{}: line {line}", path.display()))
                .or_exit(exit::USAGE)?;
            labeled.push((id.clone(), files.clone(), label));
        }
        let skipped = pairs.len() - labeled.len();
        if skipped > 0 {
            log::info!("{skipped} unlabeled pairs skipped");
        }
    }

    let rows = labeled
        .par_iter()
        .map(|(id, files, label)| {
            let pair = files.read()?;
            let sig = extract_signature(&pair, &catalog).with_context(|| format!("pair {id}"))?;
            Ok(sig.with_label(*label))
        })
        .collect::<anyhow::Result<Vec<Signature>>>()
        .or_exit(exit::USAGE)?;

    let mut db: Option<SignatureDatabase> = None;
    if !rows.is_empty() {
        let fresh = SignatureDatabase::preliminary(catalog.version(), catalog.names(), rows, registry.clone())
            .or_exit(exit::USAGE)?;
        db = Some(fresh);
    }
    for path in db_inputs {
        let other = read_database(path).or_exit(exit::USAGE)?;
        merge(&mut db, other, path).or_exit(exit::USAGE)?;
    }
    let db = db.ok_or_else(|| exit::usage("no labeled pairs or database rows found"))?;
    db.validate().or_exit(exit::USAGE)?;
    if db.label_kind() != Some(kind) {
        return Err(exit::usage(anyhow!("database labels do not match --stage {:?}", args.stage)));
    }
    write_database(&db, &output).or_exit(exit::USAGE)?;
    ctx.note(format!(
        "wrote {} rows x {} features ({}) to {}",
        db.len(),
        db.dim(),
        db.catalog_version,
        output.display()
    ));
    emit(&Summary {
        output: &output,
        rows: db.len(),
        features: db.dim(),
        catalog_version: &db.catalog_version,
    });
    Ok(0)
}
