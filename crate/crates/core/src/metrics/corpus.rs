//! Corpus-level scoring: per-sample METEOR and ROUGE-L, arithmetic means.

use std::io::BufRead;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::meteor::{meteor_detail, AlignmentPath};
use super::{rouge_l, tokenize, MetricConfig, TokenSeq};
use crate::error::{Error, Result};
use crate::jsonl;

/// One scoring sample as stored in a samples file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub candidate: String,
    pub references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub id: String,
    pub meteor: f64,
    pub rouge_l: f64,
    pub alignment: AlignmentPath,
}

/// How a report was computed; written alongside every score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVariant {
    pub meteor_alpha: f64,
    pub meteor_beta: f64,
    pub meteor_gamma: f64,
    pub rouge_beta: f64,
    pub stemming: bool,
    pub synonyms: bool,
    pub multi_reference: String,
    pub corpus_aggregation: String,
    pub exhaustive_alignments: usize,
    pub greedy_alignments: usize,
    pub budgeted_alignments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub per_sample: Vec<SampleScore>,
    pub corpus_meteor: f64,
    pub corpus_rouge_l: f64,
    pub variant: ScoreVariant,
}

impl ScoreReport {
    pub fn meteor_percent(&self) -> String {
        format_percent(self.corpus_meteor)
    }

    pub fn rouge_l_percent(&self) -> String {
        format_percent(self.corpus_rouge_l)
    }
}

/// Renders a score in `[0, 1]` as a percentage with two decimals.
pub fn format_percent(score: f64) -> String {
    format!("{:.2}", score * 100.0)
}

pub fn score_sample(sample: &Sample, config: &MetricConfig) -> Result<SampleScore> {
    if sample.references.is_empty() {
        return Err(Error::invalid(format!("sample {} has no references", sample.id)));
    }
    let candidate = tokenize(&sample.candidate);
    let references: Vec<TokenSeq> = sample.references.iter().map(|r| tokenize(r)).collect();
    let meteor = meteor_detail(&candidate, &references, config)?;
    Ok(SampleScore {
        id: sample.id.clone(),
        meteor: meteor.score,
        rouge_l: rouge_l(&candidate, &references, config)?,
        alignment: meteor.path,
    })
}

pub fn corpus_score(samples: &[Sample], config: &MetricConfig) -> Result<ScoreReport> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::invalid("corpus_score needs at least one sample"));
    }
    let per_sample = samples
        .par_iter()
        .map(|s| score_sample(s, config))
        .collect::<Result<Vec<_>>>()?;
    let n = per_sample.len() as f64;
    let corpus_meteor = per_sample.iter().map(|s| s.meteor).sum::<f64>() / n;
    let corpus_rouge_l = per_sample.iter().map(|s| s.rouge_l).sum::<f64>() / n;
    let count = |p| per_sample.iter().filter(|s| s.alignment == p).count();
    let variant = ScoreVariant {
        meteor_alpha: config.meteor_alpha,
        meteor_beta: config.meteor_beta,
        meteor_gamma: config.meteor_gamma,
        rouge_beta: config.rouge_beta,
        stemming: config.use_stemming,
        synonyms: false,
        multi_reference: "max".into(),
        corpus_aggregation: "mean".into(),
        exhaustive_alignments: count(AlignmentPath::Exhaustive),
        greedy_alignments: count(AlignmentPath::Greedy),
        budgeted_alignments: count(AlignmentPath::Budgeted),
    };
    Ok(ScoreReport {
        per_sample,
        corpus_meteor,
        corpus_rouge_l,
        variant,
    })
}

pub fn read_samples(path: &Path) -> Result<Vec<Sample>> {
    jsonl::read_path(path)
}

pub fn parse_samples(reader: impl BufRead) -> Result<Vec<Sample>> {
    jsonl::read(reader, "samples")
}
