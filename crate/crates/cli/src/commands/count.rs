use anyhow::{Context, Result};
use changekit_core::mask::{bucketize, count_regions_with, load_mask, BoundingBox, CountBucket};
use serde::Serialize;

use super::Session;
use crate::cli::CountArgs;

#[derive(Debug, Serialize)]
struct MaskCount {
    mask: String,
    region_count: usize,
    bucket: CountBucket,
    areas: Vec<usize>,
    bboxes: Vec<BoundingBox>,
}

pub fn run(session: &Session, args: &CountArgs) -> Result<()> {
    let config = session.with_regions(&args.regions);
    let options = config.regions.options()?;
    let mut rows = Vec::with_capacity(args.masks.len());
    for path in &args.masks {
        let mask = load_mask(path, config.regions.threshold).with_context(|| format!("loading {}", path.display()))?;
        let stats = count_regions_with(&mask, &options);
        let row = MaskCount {
            mask: path.display().to_string(),
            region_count: stats.region_count,
            bucket: bucketize(stats.region_count),
            areas: stats.areas,
            bboxes: stats.bboxes,
        };
        println!("{}", serde_json::to_string(&row)?);
        rows.push(row);
    }
    session.out.write_jsonl("region_counts.jsonl", &rows)?;
    Ok(())
}
