//! Bi-temporal dataset ingestion, filtering, caption joining, description
//! composition and split statistics.
//!
//! Datasets follow the common change-detection layout: one directory per
//! split, each holding mirrored pre-change, post-change and mask folders
//! with identical file names.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::mask::{count_regions_with, load_mask, ChangeMask, RegionOptions};
use crate::template::count_sentence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "val" | "valid" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(format!("unknown split {other:?}"))),
        }
    }
}

/// Directory naming convention of a dataset root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetLayout {
    pub pre_dir: String,
    pub post_dir: String,
    pub mask_dir: String,
    /// Split directory name and the split it holds.
    pub splits: Vec<(String, Split)>,
}

impl Default for DatasetLayout {
    fn default() -> Self {
        Self::levir_cd()
    }
}

impl DatasetLayout {
    /// `train|val|test/{A,B,label}`.
    pub fn levir_cd() -> Self {
        Self {
            pre_dir: "A".into(),
            post_dir: "B".into(),
            mask_dir: "label".into(),
            splits: Split::ALL.iter().map(|s| (s.as_str().to_owned(), *s)).collect(),
        }
    }

    /// `train|val|test/{time1,time2,label}`.
    pub fn sysu_cd() -> Self {
        Self {
            pre_dir: "time1".into(),
            post_dir: "time2".into(),
            mask_dir: "label".into(),
            ..Self::levir_cd()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitemporalPair {
    pub id: String,
    pub dataset: String,
    pub split: Split,
    pub pre_image: PathBuf,
    pub post_image: PathBuf,
    pub mask: PathBuf,
}

impl BitemporalPair {
    /// Image paths relative to `root`, pre then post, with `/` separators.
    pub fn image_refs(&self, root: &Path) -> [String; 2] {
        [relative(&self.pre_image, root), relative(&self.post_image, root)]
    }
}

fn relative(path: &Path, root: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// A pair that could not be used, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairIssue {
    pub split: Option<Split>,
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub pairs: Vec<BitemporalPair>,
    pub skipped: Vec<PairIssue>,
}

const IMAGE_EXTENSIONS: [&str; 6] = ["png", "jpg", "jpeg", "tif", "tiff", "bmp"];

fn list_images(dir: &Path) -> Result<BTreeSet<String>> {
    let mut names = BTreeSet::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if path.is_file() && is_image {
            names.insert(entry.file_name().to_string_lossy().into_owned());
        }
    }
    Ok(names)
}

/// Enumerates mirrored image triples under `root`. Split directories that
/// do not exist are ignored; incomplete or inconsistent triples are skipped
/// and reported.
pub fn ingest(root: &Path, dataset: &str, layout: &DatasetLayout) -> Result<IngestReport> {
    if !root.is_dir() {
        return Err(Error::NotFound(format!("dataset root {}", root.display())));
    }
    let mut report = IngestReport::default();
    let mut splits = layout.splits.clone();
    splits.sort_by_key(|(_, s)| *s);

    for (dir_name, split) in splits {
        let split_dir = root.join(&dir_name);
        if !split_dir.is_dir() {
            continue;
        }
        let dirs = [&layout.pre_dir, &layout.post_dir, &layout.mask_dir].map(|d| split_dir.join(d));
        let listings = dirs
            .iter()
            .map(|d| {
                if d.is_dir() {
                    list_images(d)
                } else {
                    Ok(BTreeSet::new())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let all_names: BTreeSet<&String> = listings.iter().flatten().collect();
        let mut seen_ids = HashSet::new();

        for name in all_names {
            let id = Path::new(name)
                .file_stem()
                .map_or_else(|| name.clone(), |s| s.to_string_lossy().into_owned());
            let missing: Vec<&str> = listings
                .iter()
                .zip([&layout.pre_dir, &layout.post_dir, &layout.mask_dir])
                .filter(|(set, _)| !set.contains(name))
                .map(|(_, d)| d.as_str())
                .collect();
            let issue = |reason: String| PairIssue {
                split: Some(split),
                id: id.clone(),
                reason,
            };
            if !missing.is_empty() {
                report
                    .skipped
                    .push(issue(format!("missing counterpart in {}", missing.join(", "))));
                continue;
            }
            if !seen_ids.insert(id.clone()) {
                report.skipped.push(issue(format!("duplicate id from file {name}")));
                continue;
            }
            let [pre, post, mask] = dirs.clone().map(|d| d.join(name));
            match same_dimensions(&[&pre, &post, &mask]) {
                Ok(()) => report.pairs.push(BitemporalPair {
                    id: id.clone(),
                    dataset: dataset.to_owned(),
                    split,
                    pre_image: pre,
                    post_image: post,
                    mask,
                }),
                Err(reason) => report.skipped.push(issue(reason)),
            }
        }
    }
    Ok(report)
}

fn same_dimensions(paths: &[&Path]) -> std::result::Result<(), String> {
    let mut dims = Vec::with_capacity(paths.len());
    for p in paths {
        let d = image::image_dimensions(p).map_err(|e| format!("unreadable {}: {e}", p.display()))?;
        dims.push(d);
    }
    if dims.windows(2).all(|w| w[0] == w[1]) {
        Ok(())
    } else {
        Err(format!("image dimensions differ: {dims:?}"))
    }
}

/// Result of a filtering step. Every input pair lands in exactly one list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Partition {
    pub kept: Vec<BitemporalPair>,
    pub removed: Vec<BitemporalPair>,
    pub errored: Vec<PairIssue>,
    pub warnings: Vec<String>,
}

impl Partition {
    pub fn total(&self) -> usize {
        self.kept.len() + self.removed.len() + self.errored.len()
    }
}

/// Removes pairs whose binarized mask contains no changed pixel.
pub fn filter_no_change(pairs: Vec<BitemporalPair>, threshold: u8) -> Partition {
    let masks: Vec<Result<ChangeMask>> = pairs.par_iter().map(|p| load_mask(&p.mask, threshold)).collect();
    let mut out = Partition::default();
    for (pair, mask) in pairs.into_iter().zip(masks) {
        match mask {
            Ok(m) if m.is_empty() => out.removed.push(pair),
            Ok(_) => out.kept.push(pair),
            Err(e) => out.errored.push(PairIssue {
                split: Some(pair.split),
                id: pair.id,
                reason: e.to_string(),
            }),
        }
    }
    out
}

/// Pair ids excluded by manual review. One id per line, optionally
/// qualified as `split/id`; blank lines and `#` comments are ignored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExclusionList {
    entries: Vec<(Option<Split>, String)>,
}

impl ExclusionList {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!(
                    "exclusion list line {}: expected a single id, got {line:?}",
                    idx + 1
                )));
            }
            let entry = match line.split_once('/') {
                Some((split, id)) if !id.is_empty() && !id.contains('/') => (
                    Some(split.parse().map_err(|_| {
                        Error::invalid(format!("exclusion list line {}: unknown split {split:?}", idx + 1))
                    })?),
                    id.to_owned(),
                ),
                Some(_) => {
                    return Err(Error::invalid(format!(
                        "exclusion list line {}: malformed id {line:?}",
                        idx + 1
                    )))
                }
                None => (None, line.to_owned()),
            };
            entries.push(entry);
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Indices of the entries naming `pair`.
    fn matching(&self, pair: &BitemporalPair) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, (split, id))| *id == pair.id && split.is_none_or(|s| s == pair.split))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Removes exactly the listed pairs. Listed ids that match no pair produce
/// a warning.
pub fn filter_ambiguous(pairs: Vec<BitemporalPair>, exclusions: &ExclusionList) -> Partition {
    let mut used = vec![false; exclusions.entries.len()];
    let mut out = Partition::default();
    for pair in pairs {
        let hits = exclusions.matching(&pair);
        if hits.is_empty() {
            out.kept.push(pair);
        } else {
            for i in hits {
                used[i] = true;
            }
            out.removed.push(pair);
        }
    }
    for ((split, id), used) in exclusions.entries.iter().zip(used) {
        if !used {
            let qualified = split.map_or_else(|| id.clone(), |s| format!("{s}/{id}"));
            out.warnings.push(format!("excluded id {qualified} matches no pair"));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    #[default]
    Draft,
    Verified,
}

/// Human change captions for one pair plus its region count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeDescriptionRecord {
    pub pair_id: String,
    pub captions: Vec<String>,
    pub region_count: usize,
    pub status: RecordStatus,
    pub annotator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verifier: Option<String>,
    /// Pre and post image paths relative to the dataset root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<[String; 2]>,
}

impl ChangeDescriptionRecord {
    pub fn validate(&self) -> Result<()> {
        if self.status == RecordStatus::Verified && self.captions.is_empty() {
            return Err(Error::invalid(format!(
                "verified record {} has no captions",
                self.pair_id
            )));
        }
        Ok(())
    }
}

/// Captions keyed by image file stem.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CaptionCorpus {
    captions: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
struct CorpusLine {
    filename: String,
    captions: Vec<String>,
}

#[derive(Deserialize)]
struct CaptionBundle {
    images: Vec<BundleImage>,
}

#[derive(Deserialize)]
struct BundleImage {
    filename: String,
    sentences: Vec<BundleSentence>,
}

#[derive(Deserialize)]
struct BundleSentence {
    raw: String,
}

fn stem_of(filename: &str) -> String {
    Path::new(filename)
        .file_stem()
        .map_or_else(|| filename.to_owned(), |s| s.to_string_lossy().into_owned())
}

impl CaptionCorpus {
    pub fn insert(&mut self, filename: &str, captions: impl IntoIterator<Item = String>) {
        let cleaned = captions
            .into_iter()
            .map(|c| c.trim().to_owned())
            .filter(|c| !c.is_empty());
        self.captions.entry(stem_of(filename)).or_default().extend(cleaned);
    }

    /// Parses either line-delimited `{"filename", "captions"}` records or a
    /// single `{"images": [{"filename", "sentences": [{"raw"}]}]}` document.
    pub fn parse(text: &str) -> Result<Self> {
        let mut corpus = Self::default();
        if let Ok(bundle) = serde_json::from_str::<CaptionBundle>(text) {
            for img in bundle.images {
                corpus.insert(&img.filename, img.sentences.into_iter().map(|s| s.raw));
            }
            return Ok(corpus);
        }
        let lines: Vec<CorpusLine> = jsonl::read(text.as_bytes(), "caption corpus")?;
        for line in lines {
            corpus.insert(&line.filename, line.captions);
        }
        Ok(corpus)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn get(&self, id: &str) -> Option<&[String]> {
        self.captions.get(id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.captions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.captions.is_empty()
    }

    fn ids(&self) -> impl Iterator<Item = &String> {
        self.captions.keys()
    }
}

#[derive(Debug, Clone)]
pub struct JoinOptions {
    pub regions: RegionOptions,
    pub threshold: u8,
    pub annotator: String,
    pub status: RecordStatus,
    /// Root used to relativize image paths in the records.
    pub root: Option<PathBuf>,
}

impl Default for JoinOptions {
    fn default() -> Self {
        Self {
            regions: RegionOptions::default(),
            threshold: 0,
            annotator: "external".into(),
            status: RecordStatus::Verified,
            root: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JoinReport {
    pub records: Vec<ChangeDescriptionRecord>,
    /// Pairs with no caption in the corpus.
    pub unmatched_pairs: Vec<String>,
    /// Corpus entries naming no pair.
    pub unused_captions: Vec<String>,
    pub errored: Vec<PairIssue>,
}

/// Attaches corpus captions to pairs by file name and fills region counts
/// from the masks.
pub fn join_captions(pairs: &[BitemporalPair], corpus: &CaptionCorpus, options: &JoinOptions) -> JoinReport {
    let counted: Vec<Option<Result<usize>>> = pairs
        .par_iter()
        .map(|p| {
            corpus.get(&p.id).filter(|c| !c.is_empty()).map(|_| {
                load_mask(&p.mask, options.threshold).map(|m| count_regions_with(&m, &options.regions).region_count)
            })
        })
        .collect();

    let mut report = JoinReport::default();
    for (pair, count) in pairs.iter().zip(counted) {
        match count {
            None => report.unmatched_pairs.push(pair.id.clone()),
            Some(Err(e)) => report.errored.push(PairIssue {
                split: Some(pair.split),
                id: pair.id.clone(),
                reason: e.to_string(),
            }),
            Some(Ok(region_count)) => report.records.push(ChangeDescriptionRecord {
                pair_id: pair.id.clone(),
                captions: corpus.get(&pair.id).unwrap_or_default().to_vec(),
                region_count,
                status: options.status,
                annotator: options.annotator.clone(),
                verifier: None,
                images: options.root.as_deref().map(|root| pair.image_refs(root)),
            }),
        }
    }
    let pair_ids: HashSet<&str> = pairs.iter().map(|p| p.id.as_str()).collect();
    report.unused_captions = corpus
        .ids()
        .filter(|id| !pair_ids.contains(id.as_str()))
        .cloned()
        .collect();
    report
}

/// Joins the captions into one text and appends the region-count sentence.
pub fn compose_description(record: &ChangeDescriptionRecord) -> Result<String> {
    if record.captions.is_empty() {
        return Err(Error::invalid(format!("record {} has no captions", record.pair_id)));
    }
    let mut parts = Vec::with_capacity(record.captions.len() + 1);
    for caption in &record.captions {
        let trimmed = caption.trim().trim_end_matches(|c: char| c == '.' || c.is_whitespace());
        if trimmed.is_empty() {
            return Err(Error::invalid(format!("record {} has a blank caption", record.pair_id)));
        }
        parts.push(format!("{trimmed}."));
    }
    parts.push(count_sentence(record.region_count));
    Ok(parts.join(" "))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub dataset: String,
    pub split: Split,
    pub pairs: usize,
    pub change_regions: usize,
    /// `[width, height]` when every counted mask shares one size.
    pub image_size: Option<[u32; 2]>,
    pub mixed_sizes: bool,
    /// Pairs whose mask could not be read; excluded from the totals.
    pub unreadable: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub errored: Vec<PairIssue>,
}

impl DatasetManifest {
    pub fn entry(&self, dataset: &str, split: Split) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.dataset == dataset && e.split == split)
    }
}

#[derive(Debug, Clone)]
pub struct StatsOptions {
    pub regions: RegionOptions,
    pub threshold: u8,
    /// Splits reported for every dataset, even when they hold no pairs.
    pub splits: Vec<Split>,
}

impl Default for StatsOptions {
    fn default() -> Self {
        Self {
            regions: RegionOptions::default(),
            threshold: 0,
            splits: Split::ALL.to_vec(),
        }
    }
}

/// Per dataset and split: pair count and summed change-region count.
pub fn dataset_stats(pairs: &[BitemporalPair], options: &StatsOptions) -> DatasetManifest {
    let measured: Vec<Result<(usize, [u32; 2])>> = pairs
        .par_iter()
        .map(|p| {
            let mask = load_mask(&p.mask, options.threshold)?;
            let size = [mask.width() as u32, mask.height() as u32];
            Ok((count_regions_with(&mask, &options.regions).region_count, size))
        })
        .collect();

    let mut table: BTreeMap<(String, Split), ManifestEntry> = BTreeMap::new();
    let blank = |dataset: &str, split| ManifestEntry {
        dataset: dataset.to_owned(),
        split,
        pairs: 0,
        change_regions: 0,
        image_size: None,
        mixed_sizes: false,
        unreadable: 0,
    };
    for pair in pairs {
        for split in &options.splits {
            table
                .entry((pair.dataset.clone(), *split))
                .or_insert_with(|| blank(&pair.dataset, *split));
        }
    }
    let mut manifest = DatasetManifest::default();
    for (pair, result) in pairs.iter().zip(measured) {
        let entry = table
            .entry((pair.dataset.clone(), pair.split))
            .or_insert_with(|| blank(&pair.dataset, pair.split));
        match result {
            Ok((regions, size)) => {
                if entry.pairs == 0 {
                    entry.image_size = Some(size);
                } else if entry.image_size != Some(size) {
                    entry.mixed_sizes = true;
                    entry.image_size = None;
                }
                entry.pairs += 1;
                entry.change_regions += regions;
            }
            Err(e) => {
                entry.unreadable += 1;
                manifest.errored.push(PairIssue {
                    split: Some(pair.split),
                    id: pair.id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    manifest.entries = table.into_values().collect();
    manifest
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(captions: &[&str], count: usize) -> ChangeDescriptionRecord {
        ChangeDescriptionRecord {
            pair_id: "p".into(),
            captions: captions.iter().map(|s| s.to_string()).collect(),
            region_count: count,
            status: RecordStatus::Verified,
            annotator: "a".into(),
            verifier: None,
            images: None,
        }
    }

    #[test]
    fn compose_single_caption() {
        assert_eq!(
            compose_description(&record(&["a road was expanded"], 3)).unwrap(),
            "a road was expanded. There are 3 change regions between the two images."
        );
    }

    #[test]
    fn compose_singular_and_order() {
        let text = compose_description(&record(&["trees were cut.", "a pond appeared"], 1)).unwrap();
        assert_eq!(
            text,
            "trees were cut. a pond appeared. There is 1 change region between the two images."
        );
    }

    #[test]
    fn compose_rejects_empty_and_blank() {
        assert!(compose_description(&record(&[], 2)).is_err());
        assert!(compose_description(&record(&["ok", " . "], 2)).is_err());
    }

    #[test]
    fn exclusion_list_parsing() {
        let list = ExclusionList::parse("# ambiguous\n00012\n\ntest/00400  # unclear type\n").unwrap();
        assert_eq!(list.len(), 2);
        assert!(ExclusionList::parse("a b\n").is_err());
        assert!(ExclusionList::parse("bogus/1\n").is_err());
        assert!(ExclusionList::parse("").unwrap().is_empty());
    }

    #[test]
    fn corpus_formats() {
        let lines = r#"{"filename":"train_000001.png","captions":[" a house was built ",""]}"#;
        let corpus = CaptionCorpus::parse(lines).unwrap();
        assert_eq!(corpus.get("train_000001").unwrap(), &["a house was built".to_owned()]);

        let bundle = r#"{"images":[{"filepath":"train","filename":"t_1.png",
            "sentences":[{"raw":" roads appear .","tokens":["roads"]},{"raw":"new houses"}]}]}"#;
        let corpus = CaptionCorpus::parse(bundle).unwrap();
        assert_eq!(corpus.get("t_1").unwrap().len(), 2);
    }

    #[test]
    fn split_parsing() {
        assert_eq!("validation".parse::<Split>().unwrap(), Split::Val);
        assert!("dev".parse::<Split>().is_err());
    }

    #[test]
    fn verified_record_needs_captions() {
        assert!(record(&[], 0).validate().is_err());
        let mut draft = record(&[], 0);
        draft.status = RecordStatus::Draft;
        assert!(draft.validate().is_ok());
    }
}
