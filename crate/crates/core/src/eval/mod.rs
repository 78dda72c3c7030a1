//! Evaluation of model outputs: description scores, counting-answer
//! parsing and accuracy, and results tables.

pub mod answer;
pub mod counting;
pub mod describe;
pub mod table;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;

pub use answer::{parse_count_answer, CountOutcome};
pub use counting::{
    accuracy_against, counting_accuracy, load_pair_masks, truth_buckets, CountJudgement, CountingReport, UnparsedPolicy,
};
pub use describe::{score_descriptions, DescriptionScores, ReferenceMode};
pub use table::{render_table, EvalReport};

/// One model answer for one image pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub pair_id: String,
    pub response: String,
}

/// Reads a JSONL response file and checks that ids are unique.
pub fn read_responses(path: &Path) -> Result<Vec<ResponseRecord>> {
    let responses = jsonl::read_path(path)?;
    check_unique(&responses)?;
    Ok(responses)
}

pub(crate) fn check_unique(responses: &[ResponseRecord]) -> Result<()> {
    let mut seen = BTreeSet::new();
    let dups: BTreeSet<&str> = responses
        .iter()
        .filter(|r| !seen.insert(r.pair_id.as_str()))
        .map(|r| r.pair_id.as_str())
        .collect();
    if dups.is_empty() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "duplicate response ids: {}",
            dups.into_iter().collect::<Vec<_>>().join(", ")
        )))
    }
}
