//! Bucketed region-count accuracy.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::answer::{parse_count_answer, CountOutcome};
use super::{check_unique, ResponseRecord};
use crate::dataset::BitemporalPair;
use crate::error::{Error, Result};
use crate::mask::{bucketize, count_regions_with, load_mask, ChangeMask, CountBucket, RegionOptions};

/// How answers that name no bucket enter the accuracy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnparsedPolicy {
    /// Counted in the denominator as wrong answers.
    #[default]
    Incorrect,
    /// Left out of the denominator; still reported.
    Exclude,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountJudgement {
    pub pair_id: String,
    pub truth: CountBucket,
    pub answer: CountOutcome,
}

impl CountJudgement {
    pub fn is_correct(&self) -> bool {
        self.answer == CountOutcome::Bucket(self.truth)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingReport {
    pub total: usize,
    pub correct: usize,
    pub incorrect: usize,
    pub unparsed: usize,
    pub accuracy: f64,
    pub policy: UnparsedPolicy,
    /// Sorted by pair id.
    pub judgements: Vec<CountJudgement>,
}

/// Ground-truth bucket of every mask.
pub fn truth_buckets(masks: &BTreeMap<String, ChangeMask>, options: &RegionOptions) -> BTreeMap<String, CountBucket> {
    masks
        .par_iter()
        .map(|(id, mask)| (id.clone(), bucketize(count_regions_with(mask, options).region_count)))
        .collect()
}

/// Loads the mask of every pair, keyed by pair id.
pub fn load_pair_masks(pairs: &[BitemporalPair], threshold: u8) -> Result<BTreeMap<String, ChangeMask>> {
    pairs
        .par_iter()
        .map(|p| Ok((p.id.clone(), load_mask(&p.mask, threshold)?)))
        .collect()
}

/// Accuracy of counting answers against ground-truth buckets.
///
/// Every response must have a ground-truth entry; missing ids are listed in
/// the error. Ground-truth entries without a response are ignored.
pub fn accuracy_against(
    responses: &[ResponseRecord],
    truth: &BTreeMap<String, CountBucket>,
    policy: UnparsedPolicy,
) -> Result<CountingReport> {
    check_unique(responses)?;
    let missing: Vec<&str> = responses
        .iter()
        .filter(|r| !truth.contains_key(&r.pair_id))
        .map(|r| r.pair_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::NotFound(format!(
            "no mask for response ids: {}",
            missing.join(", ")
        )));
    }

    let mut judgements: Vec<CountJudgement> = responses
        .par_iter()
        .map(|r| CountJudgement {
            pair_id: r.pair_id.clone(),
            truth: truth[&r.pair_id],
            answer: parse_count_answer(&r.response),
        })
        .collect();
    judgements.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));

    let correct = judgements.iter().filter(|j| j.is_correct()).count();
    let unparsed = judgements
        .iter()
        .filter(|j| j.answer == CountOutcome::Unparseable)
        .count();
    let total = judgements.len();
    let incorrect = total - correct - unparsed;
    let denominator = match policy {
        UnparsedPolicy::Incorrect => total,
        UnparsedPolicy::Exclude => total - unparsed,
    };
    let accuracy = if denominator == 0 {
        0.0
    } else {
        correct as f64 / denominator as f64
    };
    Ok(CountingReport {
        total,
        correct,
        incorrect,
        unparsed,
        accuracy,
        policy,
        judgements,
    })
}

/// Counts regions in each mask, buckets the counts and scores the
/// responses against them.
pub fn counting_accuracy(
    responses: &[ResponseRecord],
    masks: &BTreeMap<String, ChangeMask>,
    options: &RegionOptions,
    policy: UnparsedPolicy,
) -> Result<CountingReport> {
    accuracy_against(responses, &truth_buckets(masks, options), policy)
}
