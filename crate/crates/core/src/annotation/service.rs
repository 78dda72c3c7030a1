//! The annotation service: a dataset's pairs, their region counts, and the
//! event-sourced annotation state behind one writer.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::log::{AnnotationEvent, EventBody, EventLog, Verdict};
use super::state::{AnnotationState, PairState, PairStatus, ProgressSummary, StatusFilter};
use crate::dataset::{BitemporalPair, ChangeDescriptionRecord, RecordStatus, Split};
use crate::error::{Error, Result};
use crate::mask::{count_regions_with, load_mask, RegionOptions};

pub type Clock = Box<dyn Fn() -> u64 + Send + Sync>;

fn system_clock() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceOptions {
    pub regions: RegionOptions,
    pub threshold: u8,
    pub page_size: usize,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        Self {
            regions: RegionOptions::default(),
            threshold: 0,
            page_size: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageKind {
    Pre,
    Post,
    Mask,
}

impl std::str::FromStr for ImageKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pre" => Ok(ImageKind::Pre),
            "post" => Ok(ImageKind::Post),
            "mask" => Ok(ImageKind::Mask),
            other => Err(Error::invalid(format!(
                "unknown image kind {other:?}; expected pre, post or mask"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSummary {
    pub id: String,
    pub split: Split,
    pub status: PairStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairPage {
    pub items: Vec<PairSummary>,
    /// 1-based.
    pub page: usize,
    pub page_size: usize,
    /// Pairs matching the filter across all pages.
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairPayload {
    pub id: String,
    pub dataset: String,
    pub split: Split,
    pub status: PairStatus,
    pub region_count: usize,
    /// `None` until captions have been submitted.
    pub record: Option<ChangeDescriptionRecord>,
    pub images: ImageUrls,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageUrls {
    pub pre: String,
    pub post: String,
    pub mask: String,
}

struct PairEntry {
    pair: BitemporalPair,
    region_count: usize,
}

struct Writer {
    log: EventLog,
}

pub struct AnnotationService {
    root: PathBuf,
    entries: BTreeMap<String, PairEntry>,
    state: RwLock<AnnotationState>,
    writer: Mutex<Writer>,
    clock: Clock,
    options: ServiceOptions,
}

impl std::fmt::Debug for AnnotationService {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AnnotationService")
            .field("root", &self.root)
            .field("pairs", &self.entries.len())
            .finish_non_exhaustive()
    }
}

impl AnnotationService {
    /// Counts the regions of every mask and replays the log at `log_path`.
    pub fn open(root: &Path, pairs: Vec<BitemporalPair>, log_path: &Path, options: ServiceOptions) -> Result<Self> {
        if options.page_size == 0 {
            return Err(Error::invalid("page size must be positive"));
        }
        let counted = pairs
            .into_par_iter()
            .map(|pair| {
                let mask = load_mask(&pair.mask, options.threshold)?;
                let region_count = count_regions_with(&mask, &options.regions).region_count;
                Ok(PairEntry { pair, region_count })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut entries = BTreeMap::new();
        for entry in counted {
            let id = entry.pair.id.clone();
            if entries.insert(id.clone(), entry).is_some() {
                return Err(Error::invalid(format!("duplicate pair id {id}")));
            }
        }
        let (log, replay) = EventLog::open(log_path)?;
        let state = AnnotationState::replay(entries.keys().cloned(), &replay.events)?;
        Ok(Self {
            root: root.to_path_buf(),
            entries,
            state: RwLock::new(state),
            writer: Mutex::new(Writer { log }),
            clock: Box::new(system_clock),
            options,
        })
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// A copy of the current state.
    pub fn snapshot(&self) -> AnnotationState {
        self.state.read().expect("state lock poisoned").clone()
    }

    pub fn list_pairs(&self, filter: StatusFilter, page: usize) -> Result<PairPage> {
        if page == 0 {
            return Err(Error::invalid("pages are numbered from 1"));
        }
        let state = self.state.read().expect("state lock poisoned");
        let matching: Vec<PairSummary> = state
            .iter()
            .filter(|(_, s)| filter.matches(s.status))
            .map(|(id, s)| PairSummary {
                id: id.to_owned(),
                split: self.entries[id].pair.split,
                status: s.status,
            })
            .collect();
        let size = self.options.page_size;
        let total = matching.len();
        let items = matching.into_iter().skip((page - 1) * size).take(size).collect();
        Ok(PairPage {
            items,
            page,
            page_size: size,
            total,
        })
    }

    fn entry(&self, id: &str) -> Result<&PairEntry> {
        self.entries
            .get(id)
            .ok_or_else(|| Error::NotFound(format!("pair {id}")))
    }

    fn record_of(&self, entry: &PairEntry, state: &PairState) -> Option<ChangeDescriptionRecord> {
        if state.status == PairStatus::Unannotated {
            return None;
        }
        Some(ChangeDescriptionRecord {
            pair_id: entry.pair.id.clone(),
            captions: state.captions.clone(),
            region_count: entry.region_count,
            status: if state.status == PairStatus::Verified {
                RecordStatus::Verified
            } else {
                RecordStatus::Draft
            },
            annotator: state.annotator.clone().unwrap_or_default(),
            verifier: state.verifier.clone().filter(|_| state.status == PairStatus::Verified),
            images: Some(entry.pair.image_refs(&self.root)),
        })
    }

    pub fn pair_payload(&self, id: &str) -> Result<PairPayload> {
        let entry = self.entry(id)?;
        let state = self.state.read().expect("state lock poisoned");
        let pair_state = state.get(id).expect("state covers every pair");
        let base = format!("/api/pairs/{}/image", urlencode(id));
        Ok(PairPayload {
            id: id.to_owned(),
            dataset: entry.pair.dataset.clone(),
            split: entry.pair.split,
            status: pair_state.status,
            region_count: entry.region_count,
            record: self.record_of(entry, pair_state),
            images: ImageUrls {
                pre: format!("{base}/pre"),
                post: format!("{base}/post"),
                mask: format!("{base}/mask"),
            },
        })
    }

    /// The image as PNG bytes. PNG files are served as stored; other
    /// formats are re-encoded.
    pub fn image_png(&self, id: &str, kind: ImageKind) -> Result<Vec<u8>> {
        let pair = &self.entry(id)?.pair;
        let path = match kind {
            ImageKind::Pre => &pair.pre_image,
            ImageKind::Post => &pair.post_image,
            ImageKind::Mask => &pair.mask,
        };
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
            return Ok(bytes);
        }
        let img = image::load_from_memory(&bytes).map_err(|source| Error::Image {
            path: path.clone(),
            source,
        })?;
        let mut out = std::io::Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: path.clone(),
                source,
            })?;
        Ok(out.into_inner())
    }

    /// Validates the event against the current state, appends it durably,
    /// then applies it. Writers are serialized; readers see the new state
    /// only after the append has reached disk.
    fn commit(&self, pair_id: &str, body: EventBody, actor: &str) -> Result<ChangeDescriptionRecord> {
        let entry = self.entry(pair_id)?;
        let mut writer = self.writer.lock().expect("writer lock poisoned");
        let event = AnnotationEvent {
            seq: writer.log.next_seq(),
            timestamp_ms: (self.clock)(),
            pair_id: pair_id.to_owned(),
            body,
            actor: actor.trim().to_owned(),
        };
        self.state.read().expect("state lock poisoned").check(&event)?;
        writer.log.append(&event)?;
        let mut state = self.state.write().expect("state lock poisoned");
        state.apply(&event)?;
        let record = self.record_of(entry, state.get(pair_id).expect("state covers every pair"));
        Ok(record.expect("annotated after any accepted event"))
    }

    /// Replaces the pair's captions; the pair becomes a draft.
    pub fn submit_captions(&self, id: &str, captions: &[String], annotator: &str) -> Result<ChangeDescriptionRecord> {
        let captions = captions.iter().map(|c| c.trim().to_owned()).collect();
        self.commit(id, EventBody::CaptionsSubmitted { captions }, annotator)
    }

    pub fn verify(&self, id: &str, verdict: Verdict, verifier: &str) -> Result<ChangeDescriptionRecord> {
        self.commit(id, EventBody::verdict(verdict), verifier)
    }

    pub fn progress(&self) -> ProgressSummary {
        self.state.read().expect("state lock poisoned").progress()
    }

    /// Every verified record, sorted by pair id.
    pub fn export_verified(&self) -> Vec<ChangeDescriptionRecord> {
        let state = self.state.read().expect("state lock poisoned");
        state
            .iter()
            .filter(|(_, s)| s.status == PairStatus::Verified)
            .filter_map(|(id, s)| self.record_of(&self.entries[id], s))
            .collect()
    }
}

fn urlencode(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    for b in id.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.' | b'~') {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}
