//! Longest-common-subsequence F-measure.

use super::{MetricConfig, TokenSeq};
use crate::error::{Error, Result};

/// Length of the longest common subsequence, two-row dynamic program.
pub fn lcs_length(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            curr[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(curr[j]) };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// ROUGE-L of `candidate` against a single reference.
pub fn rouge_l_single(candidate: &[String], reference: &[String], beta: f64) -> f64 {
    let lcs = lcs_length(candidate, reference);
    if lcs == 0 {
        return 0.0;
    }
    let precision = lcs as f64 / candidate.len() as f64;
    let recall = lcs as f64 / reference.len() as f64;
    let beta2 = beta * beta;
    (1.0 + beta2) * precision * recall / (recall + beta2 * precision)
}

/// Best ROUGE-L over all references.
pub fn rouge_l(candidate: &TokenSeq, references: &[TokenSeq], config: &MetricConfig) -> Result<f64> {
    if references.is_empty() {
        return Err(Error::invalid("rouge_l needs at least one reference"));
    }
    Ok(references
        .iter()
        .map(|r| rouge_l_single(candidate, r, config.rouge_beta))
        .fold(0.0, f64::max))
}
