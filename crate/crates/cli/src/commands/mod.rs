mod count;
mod dataset;
mod eval;
mod gen;
mod serve;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use changekit_core::dataset::{ingest, BitemporalPair, DatasetLayout, IngestReport};
use serde::Serialize;

use crate::cli::{Cli, Command, DatasetArgs, RegionArgs};
use crate::config::Config;

/// Report files go here; created on first write.
pub struct OutDir {
    path: PathBuf,
}

impl OutDir {
    pub fn new(path: PathBuf) -> Self {
        Self { path }
    }

    pub fn file(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.path).with_context(|| format!("creating {}", self.path.display()))?;
        Ok(self.path.join(name))
    }

    pub fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.file(name)?;
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
        Ok(path)
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_jsonl<T: Serialize>(&self, name: &str, records: &[T]) -> Result<PathBuf> {
        self.write_bytes(name, changekit_core::jsonl::to_string(records).as_bytes())
    }
}

pub struct Session {
    pub config: Config,
    pub out: OutDir,
}

impl Session {
    fn with_regions(&self, args: &RegionArgs) -> Config {
        let mut config = self.config.clone();
        if let Some(c) = args.connectivity {
            config.regions.connectivity = c;
        }
        if let Some(m) = args.min_area {
            config.regions.min_area = m;
        }
        if let Some(t) = args.threshold {
            config.regions.threshold = t;
        }
        config
    }

    fn layout(&self, name: Option<&str>) -> Result<DatasetLayout> {
        self.config.dataset.layout(name)
    }
}

/// The dataset name given on the command line, or the root's directory name.
pub fn dataset_name(root: &Path, name: Option<&str>) -> String {
    name.map(str::to_owned).unwrap_or_else(|| {
        root.canonicalize()
            .ok()
            .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "dataset".into())
    })
}

fn ingest_dataset(ctx: &Session, args: &DatasetArgs) -> Result<(String, IngestReport)> {
    let name = dataset_name(&args.root, args.dataset.as_deref());
    let report = ingest(&args.root, &name, &ctx.layout(args.layout.as_deref())?)?;
    for issue in &report.skipped {
        log::warn!("skipped pair {}: {}", issue.id, issue.reason);
    }
    Ok((name, report))
}

/// A pair with paths relative to the dataset root, for output files.
#[derive(Debug, Serialize)]
pub struct PairRow {
    pub id: String,
    pub dataset: String,
    pub split: changekit_core::dataset::Split,
    pub pre_image: String,
    pub post_image: String,
    pub mask: String,
}

impl PairRow {
    pub fn new(pair: &BitemporalPair, root: &Path) -> Self {
        let rel = |p: &Path| {
            p.strip_prefix(root)
                .unwrap_or(p)
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/")
        };
        Self {
            id: pair.id.clone(),
            dataset: pair.dataset.clone(),
            split: pair.split,
            pre_image: rel(&pair.pre_image),
            post_image: rel(&pair.post_image),
            mask: rel(&pair.mask),
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let ctx = Session {
        config: Config::load(cli.config.as_deref())?,
        out: OutDir::new(cli.out_dir),
    };
    match cli.command {
        Command::Count(args) => count::run(&ctx, &args),
        Command::Stats(args) => dataset::stats(&ctx, &args),
        Command::Filter(args) => dataset::filter(&ctx, &args),
        Command::Compose(args) => dataset::compose(&ctx, &args),
        Command::Gen(args) => gen::run(&ctx, &args),
        Command::Score(args) => eval::score(&ctx, &args),
        Command::CountEval(args) => eval::count_eval(&ctx, &args),
        Command::Serve(args) => serve::run(&ctx, &args),
    }
}
