use std::path::{Path, PathBuf};

use netdiag::cascade::{read_bundle, train_cfd, train_lpd, write_bundle, Bundle, INDEX_FILE};
use netdiag::preprocess::{read_database, Stage};
use netdiag::svm::KernelKind;
use netdiag::SvmModel;
use serde::Serialize;

use crate::exit::{self, OrExit, Outcome};
use crate::{emit, Ctx, StageArg};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Preliminary database written by `extract`.
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long)]
    stage: StageArg,
    /// Bundle directory; an existing bundle keeps its other stage.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Link classifier profile name; defaults to the config's.
    #[arg(long)]
    profile: Option<String>,
}

/// One trained classifier in the summary.
#[derive(Debug, Serialize)]
pub struct StageSummary {
    pub stage: String,
    pub kernel: KernelKind,
    pub q: usize,
    pub cv_accuracy: f64,
    pub converged: bool,
    pub sweeps: usize,
}

impl StageSummary {
    fn new(stage: String, model: &SvmModel, cv_accuracy: f64) -> Self {
        StageSummary {
            stage,
            kernel: model.kernel.kind(),
            q: model.feature_subset.len(),
            cv_accuracy,
            converged: model.converged(),
            sweeps: model.training_meta.iterations_used,
        }
    }
}

fn table(rows: &[StageSummary]) -> String {
    let mut out = format!("{:<24} {:<10} {:>4} {:>8}  {}\n", "stage", "kernel", "q", "cv_acc", "converged");
    for r in rows {
        out.push_str(&format!(
            "{:<24} {:<10} {:>4} {:>8.4}  {}\n",
            r.stage,
            r.kernel.to_string(),
            r.q,
            r.cv_accuracy,
            if r.converged { "yes" } else { "no" }
        ));
    }
    out
}

fn existing_bundle(dir: &Path) -> Outcome<Bundle> {
    if dir.join(INDEX_FILE).exists() {
        read_bundle(dir).or_exit(exit::USAGE)
    } else {
        Ok(Bundle::empty())
    }
}

pub fn run(ctx: &Ctx, args: Args) -> Outcome {
    let db_path = args
        .db
        .or_else(|| ctx.config.paths.database.clone())
        .ok_or_else(|| exit::usage("no database: pass --db or set paths.database"))?;
    let output = args
        .output
        .or_else(|| ctx.config.paths.bundle.clone())
        .ok_or_else(|| exit::usage("no bundle directory: pass --output or set paths.bundle"))?;
    let db = read_database(&db_path).or_exit(exit::USAGE)?;
    if db.stage != Stage::Preliminary {
        return Err(exit::usage(format!(
            "{}: database is {}, training needs a preliminary database",
            db_path.display(),
            db.stage.name()
        )));
    }
    if db.label_kind() != Some(args.stage.kind()) {
        return Err(exit::usage(format!(
            "{}: labels are for the {} stage, not {:?}",
            db_path.display(),
            match db.label_kind() {
                Some(netdiag::preprocess::LabelKind::Link) => "link",
                Some(netdiag::preprocess::LabelKind::Client) => "client",
                None => "no",
            },
            args.stage
        )));
    }
    let mut bundle = existing_bundle(&output)?;
    let mut summary = Vec::new();
    match args.stage {
        StageArg::Lpd => {
            let profile = args.profile.unwrap_or_else(|| ctx.config.profile.clone());
            let lpd = train_lpd(&db, &profile, &ctx.config.lpd_stage(ctx.seed)).or_exit(exit::TRAINING)?;
            summary.push(StageSummary::new(
                lpd.stage_name(),
                &lpd.model,
                lpd.selection.chosen_accuracy(),
            ));
            bundle.lpd.insert(profile, lpd);
        }
        StageArg::Cfd => {
            let stages = ctx.config.cf_stages(&db.fault_registry, ctx.seed);
            let cfd = train_cfd(&db, &stages).or_exit(exit::TRAINING)?;
            for m in &cfd.modules {
                summary.push(StageSummary::new(m.stage_name(), &m.model, m.selection.chosen_accuracy()));
            }
            bundle.cfd = cfd;
        }
    }
    for s in summary.iter().filter(|s| !s.converged) {
        log::warn!("{} stopped after {} sweeps without converging", s.stage, s.sweeps);
    }
    write_bundle(&bundle, &output).or_exit(exit::USAGE)?;
    ctx.note(table(&summary));
    emit(&summary);
    Ok(0)
}
