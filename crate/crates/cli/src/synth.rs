use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use netdiag::preprocess::{FAULTY_TAG, HEALTHY_TAG};
use netdiag::sim::{preset, LabeledScenario, Scenario, PRESETS};
use netdiag::trace::write_trace;
use rayon::prelude::*;
use serde::Serialize;

use crate::exit::{self, OrExit, Outcome};
use crate::files::{
    write_atomic, write_labels, write_truth, PairFiles, CFD_LABELS_FILE, LPD_LABELS_FILE, SCENARIOS_FILE, TRUTH_FILE,
};
use crate::{emit, Ctx};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Named scenario set.
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario", value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    preset: Option<String>,
    /// Pairs per class for `fault-matrix`.
    #[arg(long, default_value_t = 11)]
    per_class: usize,
    /// JSON file holding one scenario; the pair is named after the file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Override the bytes moved in each direction.
    #[arg(long)]
    bytes: Option<u64>,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Serialize)]
struct Summary<'a> {
    output: &'a Path,
    pairs: usize,
}

fn from_file(path: &Path) -> anyhow::Result<LabeledScenario> {
    let scenario = Scenario::read(path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "scenario".to_string());
    Ok(LabeledScenario {
        id,
        truth: scenario.truth(),
        scenario,
    })
}

fn write_all(ctx: &Ctx, scenarios: &[LabeledScenario], out: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    scenarios.par_iter().try_for_each(|s| -> anyhow::Result<()> {
        let pair = s.scenario.run().with_context(|| format!("scenario {}", s.id))?;
        let files = PairFiles::of(&out.join(&s.id));
        write_trace(&pair.download, &files.download)?;
        write_trace(&pair.upload, &files.upload)?;
        Ok(())
    })?;
    let registry = &ctx.config.faults;
    write_labels(
        &out.join(LPD_LABELS_FILE),
        scenarios.iter().map(|s| {
            let tag = if s.truth.link == netdiag::preprocess::LinkClass::Faulty { FAULTY_TAG } else { HEALTHY_TAG };
            (s.id.as_str(), tag.to_string())
        }),
    )?;
    write_labels(
        &out.join(CFD_LABELS_FILE),
        scenarios.iter().filter_map(|s| {
            s.cfd_label(registry).map(|_| {
                let tag = s.truth.client_faults.iter().next().cloned().unwrap_or_else(|| HEALTHY_TAG.to_string());
                (s.id.as_str(), tag)
            })
        }),
    )?;
    write_truth(&out.join(TRUTH_FILE), scenarios.iter().map(|s| (s.id.as_str(), &s.truth)))?;
    let mut json = serde_json::to_string_pretty(scenarios)?;
    json.push('\n');
    write_atomic(&out.join(SCENARIOS_FILE), json.as_bytes())
}

pub fn run(ctx: &Ctx, args: Args) -> Outcome {
    let mut scenarios = match (&args.preset, &args.scenario) {
        (Some(name), _) => preset(name, args.per_class, ctx.seed).or_exit(exit::USAGE)?,
        (None, Some(path)) => vec![from_file(path).or_exit(exit::USAGE)?],
        (None, None) => return Err(exit::usage("pass --preset or --scenario")),
    };
    if let Some(bytes) = args.bytes {
        if bytes == 0 {
            return Err(exit::usage("--bytes must be positive"));
        }
        for s in &mut scenarios {
            s.scenario.bytes = bytes;
        }
    }
    write_all(ctx, &scenarios, &args.output).or_exit(exit::USAGE)?;
    ctx.note(format!("wrote {} trace pairs to {}", scenarios.len(), args.output.display()));
    emit(&Summary {
        output: &args.output,
        pairs: scenarios.len(),
    });
    Ok(0)
}
