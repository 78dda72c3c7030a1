//! Conversation generation: LLM-backed with retries, or the deterministic
//! template fallback.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::llm::{LlmClient, LlmError};
use super::prompt::{build_prompt, PromptTemplate};
use super::record::InstructionRecord;
use crate::dataset::{compose_description, ChangeDescriptionRecord};
use crate::error::Result;
use crate::mask::bucketize;
use crate::template::{count_answer, COUNT_QUESTION, DESCRIBE_QUESTION};

/// Exponential backoff: the delay before retry `k` (1-based) is
/// `base_delay * 2^(k-1)`, plus up to `jitter` extra.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay: Duration,
    pub jitter: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
            jitter: Duration::ZERO,
        }
    }
}

impl RetryPolicy {
    pub fn delay_before_retry(&self, retry: u32) -> Duration {
        let doubled = self
            .base_delay
            .saturating_mul(1u32 << (retry.saturating_sub(1)).min(30));
        if self.jitter.is_zero() {
            doubled
        } else {
            doubled + self.jitter.mul_f64(rand::random::<f64>())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SkipReason {
    Transport { attempts: u32, last_error: String },
    Rejected { error: String },
    Unparseable { raw: String },
    Invalid { error: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationSkip {
    pub id: String,
    #[serde(flatten)]
    pub reason: SkipReason,
}

/// Input to conversation generation for one pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DescriptionItem {
    pub id: String,
    pub description: String,
    pub images: [String; 2],
}

impl DescriptionItem {
    pub fn from_record(record: &ChangeDescriptionRecord) -> Result<Self> {
        Ok(Self {
            id: record.pair_id.clone(),
            description: compose_description(record)?,
            images: image_refs(record),
        })
    }
}

/// Image references of a record; `A/{id}.png` and `B/{id}.png` when the
/// record carries none.
pub fn image_refs(record: &ChangeDescriptionRecord) -> [String; 2] {
    record
        .images
        .clone()
        .unwrap_or_else(|| [format!("A/{}.png", record.pair_id), format!("B/{}.png", record.pair_id)])
}

/// Splits a response into `(question, answer)` rounds using the
/// `Question:` / `Answer:` line markers. Text before the first question is
/// ignored. Returns `None` unless markers strictly alternate, starting with
/// a question and ending with an answer, with non-empty content.
pub fn parse_qa_response(text: &str) -> Option<Vec<(String, String)>> {
    #[derive(PartialEq)]
    enum Marker {
        Question,
        Answer,
    }
    let mut blocks: Vec<(Marker, String)> = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim();
        let lower = trimmed.to_ascii_lowercase();
        if lower.starts_with("question:") {
            blocks.push((Marker::Question, trimmed["question:".len()..].trim().to_owned()));
        } else if lower.starts_with("answer:") {
            blocks.push((Marker::Answer, trimmed["answer:".len()..].trim().to_owned()));
        } else if let Some((_, body)) = blocks.last_mut() {
            if !trimmed.is_empty() {
                if !body.is_empty() {
                    body.push(' ');
                }
                body.push_str(trimmed);
            }
        }
    }
    if blocks.is_empty() || !blocks.len().is_multiple_of(2) {
        return None;
    }
    let mut rounds = Vec::with_capacity(blocks.len() / 2);
    let mut iter = blocks.into_iter();
    while let (Some((qm, q)), Some((am, a))) = (iter.next(), iter.next()) {
        if qm != Marker::Question || am != Marker::Answer || q.is_empty() || a.is_empty() {
            return None;
        }
        rounds.push((q, a));
    }
    Some(rounds)
}

type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

/// LLM-backed conversation generator.
pub struct Generator<'a> {
    pub client: &'a dyn LlmClient,
    pub template: PromptTemplate,
    pub retry: RetryPolicy,
    sleep: Sleeper,
}

impl<'a> Generator<'a> {
    pub fn new(client: &'a dyn LlmClient, template: PromptTemplate, retry: RetryPolicy) -> Self {
        Self {
            client,
            template,
            retry,
            sleep: Arc::new(thread::sleep),
        }
    }

    /// Replaces the function used to wait between retries.
    pub fn with_sleeper(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Arc::new(sleep);
        self
    }

    fn complete_with_retry(&self, prompt: &str) -> std::result::Result<String, SkipReason> {
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.client.complete(prompt) {
                Ok(text) => return Ok(text),
                Err(LlmError::Rejected(error)) => return Err(SkipReason::Rejected { error }),
                Err(LlmError::Transport(e)) => {
                    let retry = attempts;
                    if retry > self.retry.max_retries {
                        return Err(SkipReason::Transport {
                            attempts,
                            last_error: e,
                        });
                    }
                    log::warn!("LLM transport failure (attempt {attempts}): {e}");
                    (self.sleep)(self.retry.delay_before_retry(retry));
                }
            }
        }
    }

    /// Asks the LLM for a conversation about one description.
    pub fn generate_conversation(
        &self,
        item: &DescriptionItem,
    ) -> std::result::Result<InstructionRecord, GenerationSkip> {
        let skip = |reason| GenerationSkip {
            id: item.id.clone(),
            reason,
        };
        let prompt = build_prompt(&item.description, &self.template)
            .map_err(|e| skip(SkipReason::Invalid { error: e.to_string() }))?;
        let raw = self.complete_with_retry(&prompt).map_err(skip)?;
        let Some(rounds) = parse_qa_response(&raw) else {
            log::warn!("unparseable response for {}: {raw}", item.id);
            return Err(skip(SkipReason::Unparseable { raw }));
        };
        InstructionRecord::from_rounds(item.id.clone(), item.images.clone(), &rounds)
            .map_err(|e| skip(SkipReason::Invalid { error: e.to_string() }))
    }
}

/// Records produced plus skipped items; `records.len() + skips.len()`
/// equals the number of inputs. Both lists are sorted by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GenerationOutcome {
    pub records: Vec<InstructionRecord>,
    pub skips: Vec<GenerationSkip>,
}

/// Generates conversations with at most `parallelism` client calls in
/// flight.
pub fn generate_all(generator: &Generator<'_>, items: &[DescriptionItem], parallelism: usize) -> GenerationOutcome {
    let results: Mutex<Vec<Option<std::result::Result<InstructionRecord, GenerationSkip>>>> =
        Mutex::new(vec![None; items.len()]);
    let next = AtomicUsize::new(0);
    thread::scope(|scope| {
        for _ in 0..parallelism.clamp(1, items.len().max(1)) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(idx) else { break };
                let result = generator.generate_conversation(item);
                results.lock().expect("results lock")[idx] = Some(result);
            });
        }
    });
    let mut outcome = GenerationOutcome::default();
    for result in results.into_inner().expect("results lock").into_iter().flatten() {
        match result {
            Ok(record) => outcome.records.push(record),
            Err(skip) => outcome.skips.push(skip),
        }
    }
    outcome.records.sort_by(|a, b| a.id.cmp(&b.id));
    outcome.skips.sort_by(|a, b| a.id.cmp(&b.id));
    outcome
}

/// Two fixed rounds: describe the changes, then the counting question
/// answered with the bucket of the record's region count.
pub fn template_fallback(record: &ChangeDescriptionRecord) -> Result<InstructionRecord> {
    let description = compose_description(record)?;
    let rounds = [
        (DESCRIBE_QUESTION.to_owned(), description),
        (COUNT_QUESTION.to_owned(), count_answer(bucketize(record.region_count))),
    ];
    InstructionRecord::from_rounds(record.pair_id.clone(), image_refs(record), &rounds)
}
