//! Caption annotation and verification backed by an append-only event log.

pub mod log;
pub mod service;
pub mod state;

pub use log::{AnnotationEvent, EventBody, EventLog, Replay, Verdict};
pub use service::{AnnotationService, Clock, ImageKind, ImageUrls, PairPage, PairPayload, PairSummary, ServiceOptions};
pub use state::{validate_captions, AnnotationState, PairState, PairStatus, ProgressSummary, StatusFilter};
