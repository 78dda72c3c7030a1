//! Caption similarity metrics: ROUGE-L and METEOR with multi-reference
//! support and corpus aggregation.

mod config;
pub mod corpus;
pub mod meteor;
pub mod rouge;
mod tokenize;

pub use config::MetricConfig;
pub use corpus::{
    corpus_score, format_percent, parse_samples, read_samples, Sample, SampleScore, ScoreReport, ScoreVariant,
};
pub use meteor::{meteor, meteor_detail, AlignmentPath, MeteorDetail};
pub use rouge::{lcs_length, rouge_l};
pub use tokenize::{tokenize, TokenSeq};
