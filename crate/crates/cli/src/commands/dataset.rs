//! `stats`, `filter` and `compose`.

use std::path::Path;

use anyhow::{Context, Result};
use changekit_core::dataset::{
    compose_description, dataset_stats, filter_ambiguous, filter_no_change, join_captions, BitemporalPair,
    CaptionCorpus, ChangeDescriptionRecord, ExclusionList, PairIssue,
};
use changekit_core::jsonl;
use serde::Serialize;

use super::{dataset_name, ingest_dataset, PairRow, Session};
use crate::cli::{ComposeArgs, DatasetArgs, FilterArgs, RegionArgs};
use crate::config::Config;

pub fn stats(session: &Session, args: &DatasetArgs) -> Result<()> {
    let config = session.with_regions(&args.regions);
    let (_, report) = ingest_dataset(session, args)?;
    let manifest = dataset_stats(&report.pairs, &config.stats_options()?);

    println!(
        "{:<12} {:<6} {:>7} {:>15}  size",
        "dataset", "split", "pairs", "change regions"
    );
    for e in &manifest.entries {
        let size = e.image_size.map_or_else(
            || if e.mixed_sizes { "mixed".into() } else { "-".into() },
            |[w, h]| format!("{w}x{h}"),
        );
        println!(
            "{:<12} {:<6} {:>7} {:>15}  {size}",
            e.dataset,
            e.split.as_str(),
            e.pairs,
            e.change_regions
        );
    }
    session.out.write_jsonl("manifest.jsonl", &manifest.entries)?;
    let mut issues = report.skipped.clone();
    issues.extend(manifest.errored.iter().cloned());
    session.out.write_jsonl("stats_issues.jsonl", &issues)?;
    Ok(())
}

/// Where each ingested pair went. `found` equals the sum of the other
/// counts.
#[derive(Debug, Serialize)]
struct FilterReport {
    found: usize,
    skipped_at_ingest: Vec<PairIssue>,
    kept: usize,
    no_change: Vec<String>,
    excluded: Vec<String>,
    unreadable: Vec<PairIssue>,
    warnings: Vec<String>,
}

struct Curated {
    kept: Vec<BitemporalPair>,
    report: FilterReport,
}

fn curate(session: &Session, config: &Config, args: &DatasetArgs, exclude: Option<&Path>) -> Result<Curated> {
    let (_, ingested) = ingest_dataset(session, args)?;
    let found = ingested.pairs.len() + ingested.skipped.len();
    let no_change = filter_no_change(ingested.pairs, config.regions.threshold);
    let mut unreadable = no_change.errored;
    let mut warnings = no_change.warnings;
    let (kept, excluded) = match exclude {
        Some(path) => {
            let list = ExclusionList::load(path).with_context(|| format!("loading {}", path.display()))?;
            let part = filter_ambiguous(no_change.kept, &list);
            unreadable.extend(part.errored);
            warnings.extend(part.warnings);
            (part.kept, part.removed)
        }
        None => (no_change.kept, Vec::new()),
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    let report = FilterReport {
        found,
        skipped_at_ingest: ingested.skipped,
        kept: kept.len(),
        no_change: no_change.removed.iter().map(|p| p.id.clone()).collect(),
        excluded: excluded.iter().map(|p| p.id.clone()).collect(),
        unreadable,
        warnings,
    };
    debug_assert_eq!(
        report.found,
        report.kept
            + report.no_change.len()
            + report.excluded.len()
            + report.unreadable.len()
            + report.skipped_at_ingest.len()
    );
    Ok(Curated { kept, report })
}

pub fn filter(session: &Session, args: &FilterArgs) -> Result<()> {
    let config = session.with_regions(&args.dataset.regions);
    let curated = curate(session, &config, &args.dataset, args.exclude.as_deref())?;
    let r = &curated.report;
    println!(
        "found {}, kept {}, no change {}, excluded {}, unreadable {}, skipped at ingest {}",
        r.found,
        r.kept,
        r.no_change.len(),
        r.excluded.len(),
        r.unreadable.len(),
        r.skipped_at_ingest.len()
    );
    let rows: Vec<PairRow> = curated
        .kept
        .iter()
        .map(|p| PairRow::new(p, &args.dataset.root))
        .collect();
    session.out.write_jsonl("pairs.jsonl", &rows)?;
    session.out.write_json("filter_report.json", r)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Description {
    pair_id: String,
    description: String,
}

#[derive(Debug, Serialize)]
struct ComposeReport {
    curation: FilterReport,
    records: usize,
    unmatched_pairs: Vec<String>,
    unused_captions: Vec<String>,
    errored: Vec<PairIssue>,
}

fn describe(records: &[ChangeDescriptionRecord]) -> Result<Vec<Description>> {
    records
        .iter()
        .map(|r| {
            Ok(Description {
                pair_id: r.pair_id.clone(),
                description: compose_description(r)?,
            })
        })
        .collect()
}

pub fn compose(session: &Session, args: &ComposeArgs) -> Result<()> {
    if let Some(path) = &args.records {
        let records: Vec<ChangeDescriptionRecord> = jsonl::read_path(path)?;
        for r in &records {
            r.validate()?;
        }
        let descriptions = describe(&records)?;
        println!("composed {} descriptions", descriptions.len());
        session.out.write_jsonl("descriptions.jsonl", &descriptions)?;
        return Ok(());
    }

    let (Some(root), Some(captions)) = (&args.root, &args.captions) else {
        anyhow::bail!("compose needs either --records or both --root and --captions");
    };
    let config = session.with_regions(&args.regions);
    let dataset_args = DatasetArgs {
        root: root.clone(),
        dataset: Some(dataset_name(root, args.dataset.as_deref())),
        layout: args.layout.clone(),
        regions: RegionArgs::default(),
    };
    let curated = curate(session, &config, &dataset_args, args.exclude.as_deref())?;
    let corpus = CaptionCorpus::load(captions).with_context(|| format!("loading {}", captions.display()))?;
    let joined = join_captions(&curated.kept, &corpus, &config.join_options(root, &args.annotator)?);
    let descriptions = describe(&joined.records)?;
    println!(
        "{} records, {} pairs without captions, {} unused caption entries, {} errors",
        joined.records.len(),
        joined.unmatched_pairs.len(),
        joined.unused_captions.len(),
        joined.errored.len()
    );
    session.out.write_jsonl("records.jsonl", &joined.records)?;
    session.out.write_jsonl("descriptions.jsonl", &descriptions)?;
    session.out.write_json(
        "compose_report.json",
        &ComposeReport {
            curation: curated.report,
            records: joined.records.len(),
            unmatched_pairs: joined.unmatched_pairs,
            unused_captions: joined.unused_captions,
            errored: joined.errored,
        },
    )?;
    Ok(())
}
