use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "changekit",
    version,
    about = "Change captioning toolkit for bi-temporal remote-sensing imagery"
)]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory that receives every report and output file.
    #[arg(long, global = true, default_value = "changekit-out")]
    pub out_dir: PathBuf,

    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count connected change regions in mask images.
    Count(CountArgs),
    /// Per-split pair and region counts of a dataset.
    Stats(DatasetArgs),
    /// Drop pairs without change and listed ambiguous pairs.
    Filter(FilterArgs),
    /// Build change descriptions from captions and masks.
    Compose(ComposeArgs),
    /// Generate the instruction-conversation file.
    Gen(GenArgs),
    /// METEOR and ROUGE-L of model descriptions.
    Score(ScoreArgs),
    /// Accuracy of bucketed region-count answers.
    #[command(name = "count-eval")]
    CountEval(CountEvalArgs),
    /// Run the annotation server, or export its verified records.
    Serve(ServeArgs),
}

#[derive(Debug, Default, Args)]
pub struct RegionArgs {
    /// 4 or 8; overrides the config file.
    #[arg(long)]
    pub connectivity: Option<u32>,
    /// Drop regions with fewer pixels; overrides the config file.
    #[arg(long)]
    pub min_area: Option<usize>,
    /// Binarization threshold; overrides the config file.
    #[arg(long)]
    pub threshold: Option<u8>,
}

#[derive(Debug, Args)]
pub struct CountArgs {
    #[arg(required = true)]
    pub masks: Vec<PathBuf>,
    #[command(flatten)]
    pub regions: RegionArgs,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Dataset root holding the split directories.
    #[arg(long)]
    pub root: PathBuf,
    /// Dataset name recorded in outputs; defaults to the root's directory name.
    #[arg(long)]
    pub dataset: Option<String>,
    /// levir_cd, sysu_cd or custom; overrides the config file.
    #[arg(long)]
    pub layout: Option<String>,
    #[command(flatten)]
    pub regions: RegionArgs,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Exclusion list: one `id` or `split/id` per line, `#` comments.
    #[arg(long)]
    pub exclude: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    /// Existing change-description records (JSONL); skips dataset curation.
    #[arg(long, conflicts_with_all = ["root", "captions"])]
    pub records: Option<PathBuf>,
    #[arg(long, requires = "captions")]
    pub root: Option<PathBuf>,
    /// Caption corpus: JSONL `{filename, captions}` or an `{"images": [...]}` bundle.
    #[arg(long, requires = "root")]
    pub captions: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub layout: Option<String>,
    #[arg(long)]
    pub exclude: Option<PathBuf>,
    /// Annotator name stamped on records built from the corpus.
    #[arg(long, default_value = "corpus")]
    pub annotator: String,
    #[command(flatten)]
    pub regions: RegionArgs,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Change-description records (JSONL).
    #[arg(long)]
    pub records: PathBuf,
    /// Use the fixed two-round template instead of the LLM service.
    #[arg(long)]
    pub offline: bool,
    /// Also use records that are not verified.
    #[arg(long)]
    pub allow_drafts: bool,
    /// Concurrent LLM requests; overrides the config file.
    #[arg(long)]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReferenceModeArg {
    Captions,
    Composed,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Ready-made samples (JSONL `{id, candidate, references}`).
    #[arg(long, conflicts_with_all = ["responses", "references"])]
    pub samples: Option<PathBuf>,
    /// Model responses (JSONL `{pair_id, response}`); repeat for several models.
    #[arg(long, requires = "references")]
    pub responses: Vec<PathBuf>,
    /// Model names for the table, in the order of `--responses`.
    #[arg(long)]
    pub model: Vec<String>,
    /// Reference change-description records (JSONL).
    #[arg(long)]
    pub references: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "captions")]
    pub reference_mode: ReferenceModeArg,
}

#[derive(Debug, Args)]
pub struct CountEvalArgs {
    /// Model responses (JSONL `{pair_id, response}`); repeat for several models.
    #[arg(long, required = true)]
    pub responses: Vec<PathBuf>,
    #[arg(long)]
    pub model: Vec<String>,
    /// Ground truth from the masks under this dataset root.
    #[arg(long, conflicts_with = "truth")]
    pub root: Option<PathBuf>,
    #[arg(long)]
    pub layout: Option<String>,
    /// Ground truth from the region counts of change-description records.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Leave unparseable answers out of the accuracy instead of counting them wrong.
    #[arg(long)]
    pub exclude_unparsed: bool,
    #[command(flatten)]
    pub regions: RegionArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Event log; created if missing.
    #[arg(long)]
    pub log: PathBuf,
    /// Listen address; overrides the config file.
    #[arg(long)]
    pub addr: Option<String>,
    /// Serve only pairs that show change and are not excluded.
    #[arg(long)]
    pub filter: bool,
    #[arg(long, requires = "filter")]
    pub exclude: Option<PathBuf>,
    /// Write verified records to this file (JSONL) and exit instead of serving.
    #[arg(long)]
    pub export: Option<PathBuf>,
}
