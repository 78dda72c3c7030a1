//! `score` and `count-eval`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use changekit_core::dataset::{ingest, ChangeDescriptionRecord};
use changekit_core::eval::{
    accuracy_against, load_pair_masks, read_responses, render_table, score_descriptions, truth_buckets, CountingReport,
    DescriptionScores, EvalReport, ReferenceMode, UnparsedPolicy,
};
use changekit_core::jsonl;
use changekit_core::mask::{bucketize, CountBucket};
use changekit_core::metrics::{corpus_score, read_samples};
use serde::Serialize;

use super::{dataset_name, Session};
use crate::cli::{CountEvalArgs, ReferenceModeArg, ScoreArgs};

/// Pairs each responses file with a model name: the matching `--model`
/// value, else the file stem.
fn model_names(files: &[PathBuf], names: &[String]) -> Result<Vec<String>> {
    if !names.is_empty() && names.len() != files.len() {
        anyhow::bail!("{} --model names for {} --responses files", names.len(), files.len());
    }
    Ok(files
        .iter()
        .enumerate()
        .map(|(i, f)| {
            names.get(i).cloned().unwrap_or_else(|| {
                f.file_stem()
                    .map_or_else(|| format!("model{}", i + 1), |s| s.to_string_lossy().into_owned())
            })
        })
        .collect())
}

#[derive(Debug, Serialize)]
struct ModelScores {
    model: String,
    meteor_percent: String,
    rouge_l_percent: String,
    #[serde(flatten)]
    scores: DescriptionScores,
}

pub fn score(session: &Session, args: &ScoreArgs) -> Result<()> {
    let metrics = &session.config.metrics;
    if let Some(path) = &args.samples {
        let samples = read_samples(path)?;
        let report = corpus_score(&samples, metrics)?;
        let model = args.model.first().cloned().unwrap_or_else(|| "samples".into());
        let table = render_table(&[EvalReport::new(model).with_scores(report.corpus_meteor, report.corpus_rouge_l)]);
        print!("{table}");
        session.out.write_json("score_report.json", &report)?;
        session.out.write_bytes("score_table.txt", table.as_bytes())?;
        return Ok(());
    }

    let Some(refs_path) = &args.references else {
        anyhow::bail!("score needs --samples, or --responses with --references");
    };
    if args.responses.is_empty() {
        anyhow::bail!("score needs at least one --responses file");
    }
    let references: Vec<ChangeDescriptionRecord> = jsonl::read_path(refs_path)?;
    let mode = match args.reference_mode {
        ReferenceModeArg::Captions => ReferenceMode::Captions,
        ReferenceModeArg::Composed => ReferenceMode::Composed,
    };
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for (path, model) in args.responses.iter().zip(model_names(&args.responses, &args.model)?) {
        let responses = read_responses(path)?;
        let scores = score_descriptions(&responses, &references, mode, metrics)
            .with_context(|| format!("scoring {}", path.display()))?;
        if !scores.unanswered.is_empty() {
            log::warn!(
                "{model}: {} reference records have no response",
                scores.unanswered.len()
            );
        }
        rows.push(EvalReport::new(&model).with_descriptions(&scores));
        reports.push(ModelScores {
            model,
            meteor_percent: scores.report.meteor_percent(),
            rouge_l_percent: scores.report.rouge_l_percent(),
            scores,
        });
    }
    let table = render_table(&rows);
    print!("{table}");
    session.out.write_json("score_report.json", &reports)?;
    session.out.write_bytes("score_table.txt", table.as_bytes())?;
    Ok(())
}

fn truth_from_records(path: &Path) -> Result<BTreeMap<String, CountBucket>> {
    let records: Vec<ChangeDescriptionRecord> = jsonl::read_path(path)?;
    let mut truth = BTreeMap::new();
    for r in records {
        if truth.insert(r.pair_id.clone(), bucketize(r.region_count)).is_some() {
            anyhow::bail!("duplicate record {} in {}", r.pair_id, path.display());
        }
    }
    Ok(truth)
}

#[derive(Debug, Serialize)]
struct ModelCounting {
    model: String,
    #[serde(flatten)]
    report: CountingReport,
}

pub fn count_eval(session: &Session, args: &CountEvalArgs) -> Result<()> {
    let config = session.with_regions(&args.regions);
    let names = model_names(&args.responses, &args.model)?;
    let all_responses = args
        .responses
        .iter()
        .map(|p| read_responses(p))
        .collect::<changekit_core::Result<Vec<_>>>()?;

    let truth = match (&args.root, &args.truth) {
        (Some(root), None) => {
            let wanted: BTreeSet<&str> = all_responses.iter().flatten().map(|r| r.pair_id.as_str()).collect();
            let layout = session.layout(args.layout.as_deref())?;
            let pairs: Vec<_> = ingest(root, &dataset_name(root, None), &layout)?
                .pairs
                .into_iter()
                .filter(|p| wanted.contains(p.id.as_str()))
                .collect();
            let masks = load_pair_masks(&pairs, config.regions.threshold)?;
            truth_buckets(&masks, &config.regions.options()?)
        }
        (None, Some(path)) => truth_from_records(path)?,
        _ => anyhow::bail!("count-eval needs exactly one of --root or --truth"),
    };
    let policy = if args.exclude_unparsed {
        UnparsedPolicy::Exclude
    } else {
        UnparsedPolicy::Incorrect
    };

    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for ((path, model), responses) in args.responses.iter().zip(names).zip(&all_responses) {
        let report =
            accuracy_against(responses, &truth, policy).with_context(|| format!("evaluating {}", path.display()))?;
        eprintln!(
            "{model}: {}/{} correct, {} unparseable",
            report.correct, report.total, report.unparsed
        );
        rows.push(EvalReport::new(&model).with_counting(&report));
        reports.push(ModelCounting { model, report });
    }
    let table = render_table(&rows);
    print!("{table}");
    session.out.write_json("count_eval.json", &reports)?;
    session.out.write_bytes("count_eval_table.txt", table.as_bytes())?;
    Ok(())
}
