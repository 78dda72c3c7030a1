//! Scoring model change descriptions against annotated references.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{check_unique, ResponseRecord};
use crate::dataset::{compose_description, ChangeDescriptionRecord};
use crate::error::{Error, Result};
use crate::metrics::{corpus_score, MetricConfig, Sample, ScoreReport};

/// What a response is compared against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// Every caption of the record is a separate reference.
    #[default]
    Captions,
    /// The single composed description (captions plus count sentence).
    Composed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptionScores {
    pub report: ScoreReport,
    pub reference_mode: ReferenceMode,
    /// Reference records that received no response.
    pub unanswered: Vec<String>,
}

pub fn score_descriptions(
    responses: &[ResponseRecord],
    references: &[ChangeDescriptionRecord],
    mode: ReferenceMode,
    config: &MetricConfig,
) -> Result<DescriptionScores> {
    if responses.is_empty() {
        return Err(Error::invalid("no responses to score"));
    }
    check_unique(responses)?;
    let mut by_id: BTreeMap<&str, &ChangeDescriptionRecord> = BTreeMap::new();
    for record in references {
        if by_id.insert(&record.pair_id, record).is_some() {
            return Err(Error::invalid(format!("duplicate reference record {}", record.pair_id)));
        }
    }
    let missing: Vec<&str> = responses
        .iter()
        .filter(|r| !by_id.contains_key(r.pair_id.as_str()))
        .map(|r| r.pair_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::NotFound(format!(
            "no reference for response ids: {}",
            missing.join(", ")
        )));
    }

    let samples = responses
        .iter()
        .map(|r| {
            let record = by_id[r.pair_id.as_str()];
            let references = match mode {
                ReferenceMode::Captions => record.captions.clone(),
                ReferenceMode::Composed => vec![compose_description(record)?],
            };
            Ok(Sample {
                id: r.pair_id.clone(),
                candidate: r.response.clone(),
                references,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let answered: BTreeSet<&str> = responses.iter().map(|r| r.pair_id.as_str()).collect();
    let unanswered = by_id
        .keys()
        .filter(|id| !answered.contains(*id))
        .map(|id| id.to_string())
        .collect();
    Ok(DescriptionScores {
        report: corpus_score(&samples, config)?,
        reference_mode: mode,
        unanswered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RecordStatus;

    fn record(id: &str, captions: &[&str]) -> ChangeDescriptionRecord {
        ChangeDescriptionRecord {
            pair_id: id.into(),
            captions: captions.iter().map(|c| c.to_string()).collect(),
            region_count: 2,
            status: RecordStatus::Verified,
            annotator: "a".into(),
            verifier: Some("v".into()),
            images: None,
        }
    }

    fn response(id: &str, text: &str) -> ResponseRecord {
        ResponseRecord {
            pair_id: id.into(),
            response: text.into(),
        }
    }

    #[test]
    fn identical_responses_score_full_rouge() {
        let refs = [
            record("a", &["two houses were built"]),
            record("b", &["a road appears"]),
        ];
        let responses = [response("a", "two houses were built"), response("b", "a road appears")];
        let scores = score_descriptions(&responses, &refs, ReferenceMode::Captions, &MetricConfig::default()).unwrap();
        assert_eq!(scores.report.rouge_l_percent(), "100.00");
        assert!(scores.unanswered.is_empty());
    }

    #[test]
    fn composed_mode_uses_count_sentence() {
        let refs = [record("a", &["two houses were built"])];
        let text = "Two houses were built. There are 2 change regions between the two images.";
        let scores = score_descriptions(
            &[response("a", text)],
            &refs,
            ReferenceMode::Composed,
            &MetricConfig::default(),
        )
        .unwrap();
        assert!((scores.report.corpus_rouge_l - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_references_listed() {
        let refs = [record("a", &["x"])];
        let err = score_descriptions(
            &[response("q", "x"), response("a", "x"), response("r", "x")],
            &refs,
            ReferenceMode::Captions,
            &MetricConfig::default(),
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("q, r"), "{err}");
    }

    #[test]
    fn reports_unanswered_and_rejects_empty() {
        let refs = [record("a", &["x"]), record("b", &["y"])];
        let scores = score_descriptions(
            &[response("a", "x")],
            &refs,
            ReferenceMode::Captions,
            &MetricConfig::default(),
        )
        .unwrap();
        assert_eq!(scores.unanswered, vec!["b".to_string()]);
        assert!(score_descriptions(&[], &refs, ReferenceMode::Captions, &MetricConfig::default()).is_err());
    }
}
