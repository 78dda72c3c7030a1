use std::net::SocketAddr;
use std::sync::Arc;

use anyhow::{Context, Result};
use changekit_core::annotation::AnnotationService;
use changekit_core::dataset::{filter_ambiguous, filter_no_change, ExclusionList};
use changekit_core::jsonl;

use super::{ingest_dataset, Session};
use crate::cli::ServeArgs;

pub fn run(session: &Session, args: &ServeArgs) -> Result<()> {
    let config = session.with_regions(&args.dataset.regions);
    let (_, ingested) = ingest_dataset(session, &args.dataset)?;
    let mut pairs = ingested.pairs;
    if args.filter {
        let part = filter_no_change(pairs, config.regions.threshold);
        log::info!("{} pairs without change left out", part.removed.len());
        pairs = part.kept;
        if let Some(path) = &args.exclude {
            let list = ExclusionList::load(path)?;
            pairs = filter_ambiguous(pairs, &list).kept;
        }
    }
    let service = AnnotationService::open(&args.dataset.root, pairs, &args.log, config.service_options()?)?;

    if let Some(path) = &args.export {
        let records = service.export_verified();
        jsonl::write_path(path, &records)?;
        println!("exported {} verified records to {}", records.len(), path.display());
        return Ok(());
    }

    let addr: SocketAddr = args
        .addr
        .as_deref()
        .unwrap_or(&config.server.addr)
        .parse()
        .context("parsing listen address")?;
    let progress = service.progress();
    println!(
        "serving {} pairs ({} verified) on http://{addr}; Ctrl-C to stop",
        progress.total, progress.verified
    );
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(changekit_server::serve(addr, Arc::new(service), async {
        tokio::signal::ctrl_c().await.ok();
    }))?;
    Ok(())
}
