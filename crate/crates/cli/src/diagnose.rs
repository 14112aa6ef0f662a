use std::path::{Path, PathBuf};

use netdiag::cascade::{bundle_catalog, diagnose, read_bundle, Bundle, LpdClassifier};

use crate::exit::{self, OrExit, Outcome};
use crate::files::PairFiles;
use crate::{emit, Ctx};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Bundle directory written by `train`.
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Path prefix of a pair: `<prefix>.down.csv` and `<prefix>.up.csv`.
    #[arg(long, conflicts_with_all = ["download", "upload"], required_unless_present_all = ["download", "upload"])]
    pair: Option<PathBuf>,
    /// Download trace captured at the client.
    #[arg(long, requires = "upload")]
    download: Option<PathBuf>,
    /// Upload trace captured at the server.
    #[arg(long, requires = "download")]
    upload: Option<PathBuf>,
    /// Link classifier profile; defaults to the only one in the bundle.
    #[arg(long)]
    profile: Option<String>,
}

/// Reads a bundle that has a link classifier and at least one client module.
pub fn load_bundle(ctx: &Ctx, dir: Option<PathBuf>) -> Outcome<Bundle> {
    let dir = dir
        .or_else(|| ctx.config.paths.bundle.clone())
        .ok_or_else(|| exit::usage("no bundle: pass --bundle or set paths.bundle"))?;
    let bundle = read_bundle(&dir).or_exit_catalog(exit::USAGE)?;
    if bundle.lpd.is_empty() || bundle.cfd.is_empty() {
        return Err(exit::usage(format!(
            "{}: bundle is incomplete; train both the lpd and cfd stages",
            dir.display()
        )));
    }
    Ok(bundle)
}

/// The requested profile, else the only one, else the config's.
pub fn pick_lpd<'a>(ctx: &Ctx, bundle: &'a Bundle, profile: Option<&str>) -> Outcome<&'a LpdClassifier> {
    let found = match profile {
        Some(p) => bundle.lpd(Some(p)),
        None => bundle.lpd(None).or_else(|_| bundle.lpd(Some(&ctx.config.profile))),
    };
    let lpd = found.or_exit(exit::USAGE)?;
    bundle_catalog(lpd, &bundle.cfd).or_exit_catalog(exit::USAGE)?;
    Ok(lpd)
}

pub fn run(ctx: &Ctx, args: Args) -> Outcome {
    let bundle = load_bundle(ctx, args.bundle)?;
    let lpd = pick_lpd(ctx, &bundle, args.profile.as_deref())?;
    let files = match (args.pair, args.download, args.upload) {
        (Some(prefix), _, _) => PairFiles::of(&prefix),
        (None, Some(download), Some(upload)) => PairFiles { download, upload },
        _ => return Err(exit::usage("pass --pair or both --download and --upload")),
    };
    for p in [&files.download, &files.upload] {
        if !Path::new(p).is_file() {
            return Err(exit::usage(format!("{}: no such trace file", p.display())));
        }
    }
    let pair = files.read().or_exit(exit::USAGE)?;
    let verdict = diagnose(lpd, &bundle.cfd, &pair).or_exit_catalog(exit::USAGE)?;
    emit(&verdict);
    ctx.note(verdict.summary());
    Ok(verdict.exit_code())
}
