//! Annotation state as a fold over the event log, and the status machine
//! that decides which events are legal.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::log::{AnnotationEvent, EventBody};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairStatus {
    #[default]
    Unannotated,
    Draft,
    Verified,
    Rejected,
}

impl PairStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PairStatus::Unannotated => "unannotated",
            PairStatus::Draft => "draft",
            PairStatus::Verified => "verified",
            PairStatus::Rejected => "rejected",
        }
    }

    /// Status after `body` is applied, or `None` if the machine forbids it.
    ///
    /// Captions may be (re)submitted to unannotated, draft and rejected
    /// pairs; verdicts apply only to drafts. Verified is final.
    pub fn after(self, body: &EventBody) -> Option<PairStatus> {
        use PairStatus::*;
        match (self, body) {
            (Unannotated | Draft | Rejected, EventBody::CaptionsSubmitted { .. }) => Some(Draft),
            (Draft, EventBody::Verified { .. }) => Some(Verified),
            (Draft, EventBody::Rejected { .. }) => Some(Rejected),
            _ => None,
        }
    }
}

impl fmt::Display for PairStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Listing filter. Besides the four statuses: `unverified` is every pair
/// not yet verified, and `todo` is the annotation queue (unannotated or
/// rejected).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatusFilter {
    #[default]
    All,
    Is(PairStatus),
    Unverified,
    Todo,
}

impl StatusFilter {
    pub fn matches(self, status: PairStatus) -> bool {
        match self {
            StatusFilter::All => true,
            StatusFilter::Is(s) => s == status,
            StatusFilter::Unverified => status != PairStatus::Verified,
            StatusFilter::Todo => matches!(status, PairStatus::Unannotated | PairStatus::Rejected),
        }
    }
}

impl FromStr for StatusFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "" | "all" => StatusFilter::All,
            "unannotated" => StatusFilter::Is(PairStatus::Unannotated),
            "draft" => StatusFilter::Is(PairStatus::Draft),
            "verified" => StatusFilter::Is(PairStatus::Verified),
            "rejected" => StatusFilter::Is(PairStatus::Rejected),
            "unverified" => StatusFilter::Unverified,
            "todo" => StatusFilter::Todo,
            other => return Err(Error::invalid(format!("unknown status filter {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairState {
    pub status: PairStatus,
    pub captions: Vec<String>,
    pub annotator: Option<String>,
    pub verifier: Option<String>,
    /// Sequence number of the last event applied to this pair.
    pub last_seq: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressSummary {
    pub unannotated: usize,
    pub draft: usize,
    pub verified: usize,
    pub rejected: usize,
    pub total: usize,
}

/// Per-pair state over a fixed set of pair ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotationState {
    pairs: BTreeMap<String, PairState>,
    last_seq: u64,
}

impl AnnotationState {
    pub fn new<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            pairs: ids.into_iter().map(|id| (id.into(), PairState::default())).collect(),
            last_seq: 0,
        }
    }

    /// Folds `events` over a fresh state.
    pub fn replay<'a, I, S>(ids: I, events: impl IntoIterator<Item = &'a AnnotationEvent>) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut state = Self::new(ids);
        for event in events {
            state.apply(event)?;
        }
        Ok(state)
    }

    pub fn get(&self, id: &str) -> Option<&PairState> {
        self.pairs.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &PairState)> {
        self.pairs.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    /// Checks that `event` is legal in the current state without applying
    /// it.
    pub fn check(&self, event: &AnnotationEvent) -> Result<PairStatus> {
        let pair = self
            .pairs
            .get(&event.pair_id)
            .ok_or_else(|| Error::NotFound(format!("pair {}", event.pair_id)))?;
        if event.seq <= self.last_seq {
            return Err(Error::invalid(format!(
                "event sequence {} does not follow {}",
                event.seq, self.last_seq
            )));
        }
        if event.actor.trim().is_empty() {
            return Err(Error::invalid("actor must not be blank"));
        }
        if let EventBody::CaptionsSubmitted { captions } = &event.body {
            validate_captions(captions)?;
        }
        pair.status.after(&event.body).ok_or_else(|| {
            Error::Conflict(format!(
                "pair {} is {}; cannot apply {}",
                event.pair_id,
                pair.status,
                body_name(&event.body)
            ))
        })
    }

    pub fn apply(&mut self, event: &AnnotationEvent) -> Result<()> {
        let next = self.check(event)?;
        let pair = self.pairs.get_mut(&event.pair_id).expect("checked above");
        match &event.body {
            EventBody::CaptionsSubmitted { captions } => {
                pair.captions = captions.clone();
                pair.annotator = Some(event.actor.clone());
                pair.verifier = None;
            }
            EventBody::Verified { .. } | EventBody::Rejected { .. } => {
                pair.verifier = Some(event.actor.clone());
            }
        }
        pair.status = next;
        pair.last_seq = event.seq;
        self.last_seq = event.seq;
        Ok(())
    }

    pub fn progress(&self) -> ProgressSummary {
        let mut p = ProgressSummary {
            total: self.pairs.len(),
            ..Default::default()
        };
        for pair in self.pairs.values() {
            match pair.status {
                PairStatus::Unannotated => p.unannotated += 1,
                PairStatus::Draft => p.draft += 1,
                PairStatus::Verified => p.verified += 1,
                PairStatus::Rejected => p.rejected += 1,
            }
        }
        p
    }
}

fn body_name(body: &EventBody) -> &'static str {
    match body {
        EventBody::CaptionsSubmitted { .. } => "captions_submitted",
        EventBody::Verified { .. } => "verified",
        EventBody::Rejected { .. } => "rejected",
    }
}

pub fn validate_captions(captions: &[String]) -> Result<()> {
    if captions.is_empty() {
        return Err(Error::invalid("at least one caption is required"));
    }
    if let Some(i) = captions.iter().position(|c| c.trim().is_empty()) {
        return Err(Error::invalid(format!("caption {} is blank", i + 1)));
    }
    Ok(())
}
