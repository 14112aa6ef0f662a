use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use netdiag::cascade::{bundle_catalog, diagnose_values, Verdict};
use netdiag::eval::{tabulate, GroundTruth, VerdictReport};
use netdiag::signature::extract_signature;
use rayon::prelude::*;
use serde::Serialize;

use crate::diagnose::{load_bundle, pick_lpd};
use crate::exit::{self, OrExit, Outcome};
use crate::files::{read_truth, write_atomic, PairFiles, TRUTH_FILE};
use crate::{emit, Ctx};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Directory holding the trace pairs.
    #[arg(long, short)]
    input: PathBuf,
    /// `id,link,client_faults` file; defaults to `truth.csv` in the input.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Directory for `report.json` and `report.txt`.
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long)]
    profile: Option<String>,
}

#[derive(Debug, Serialize)]
struct Case {
    id: String,
    truth: GroundTruth,
    verdict: Verdict,
    correct: bool,
}

#[derive(Debug, Serialize)]
struct Report {
    catalog_version: String,
    profile: String,
    summary: VerdictReport,
    cases: Vec<Case>,
}

fn text_report(r: &Report) -> String {
    let mut out = format!("profile {} | catalog {} | {} cases\n\n", r.profile, r.catalog_version, r.cases.len());
    out.push_str(&r.summary.to_table());
    let wrong: Vec<&Case> = r.cases.iter().filter(|c| !c.correct).collect();
    if !wrong.is_empty() {
        out.push_str("\nmisdiagnosed:\n");
        for c in wrong {
            out.push_str(&format!("  {:<28} expected {:<24} got {}\n", c.id, c.truth.condition(), c.verdict.summary()));
        }
    }
    out
}

pub fn run(ctx: &Ctx, args: Args) -> Outcome {
    let bundle = load_bundle(ctx, args.bundle)?;
    let lpd = pick_lpd(ctx, &bundle, args.profile.as_deref())?;
    let catalog = bundle_catalog(lpd, &bundle.cfd).or_exit_catalog(exit::USAGE)?;
    let truth_path = args.truth.unwrap_or_else(|| args.input.join(TRUTH_FILE));
    let truth = read_truth(&truth_path).or_exit(exit::USAGE)?;
    if truth.is_empty() {
        return Err(exit::usage(format!("{}: no labeled cases", truth_path.display())));
    }
    let cases: Vec<(String, GroundTruth)> = truth.into_iter().collect();
    let cases = cases
        .into_par_iter()
        .map(|(id, truth)| {
            let pair = PairFiles::of(&args.input.join(&id)).read()?;
            let sig = extract_signature(&pair, &catalog).with_context(|| format!("pair {id}"))?;
            let verdict = diagnose_values(Some(lpd), &bundle.cfd, &sig.values)?;
            let correct = truth.matches(&verdict);
            Ok(Case {
                id,
                truth,
                verdict,
                correct,
            })
        })
        .collect::<anyhow::Result<Vec<Case>>>()
        .or_exit_catalog(exit::USAGE)?;
    let pairs: Vec<(Verdict, GroundTruth)> = cases.iter().map(|c| (c.verdict.clone(), c.truth.clone())).collect();
    let report = Report {
        catalog_version: catalog.version().to_string(),
        profile: lpd.profile.clone(),
        summary: tabulate(&pairs),
        cases,
    };
    let write = || -> anyhow::Result<()> {
        fs::create_dir_all(&args.output).with_context(|| format!("creating {}", args.output.display()))?;
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        write_atomic(&args.output.join(REPORT_JSON), json.as_bytes())?;
        write_atomic(&args.output.join(REPORT_TXT), text_report(&report).as_bytes())
    };
    write().or_exit(exit::USAGE)?;
    ctx.note(report.summary.to_table());
    emit(&report.summary);
    Ok(0)
}
