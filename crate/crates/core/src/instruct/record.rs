use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::template::{POST_IMAGE_TOKEN, PRE_IMAGE_TOKEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "human")]
    Human,
    #[serde(rename = "gpt")]
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationTurn {
    #[serde(rename = "from")]
    pub role: Role,
    #[serde(rename = "value")]
    pub text: String,
}

impl ConversationTurn {
    pub fn human(text: impl Into<String>) -> Self {
        Self {
            role: Role::Human,
            text: text.into(),
        }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            text: text.into(),
        }
    }
}

/// One multi-round conversation about a bi-temporal pair.
///
/// On the wire the image references become an `images` array (pre, post)
/// and the turns a `conversations` array of `{from, value}` objects.
/// Deserialization validates the record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "WireRecord", try_from = "WireRecord")]
pub struct InstructionRecord {
    pub id: String,
    pub pre_image_ref: String,
    pub post_image_ref: String,
    pub turns: Vec<ConversationTurn>,
}

#[derive(Serialize, Deserialize)]
struct WireRecord {
    id: String,
    images: [String; 2],
    conversations: Vec<ConversationTurn>,
}

impl From<InstructionRecord> for WireRecord {
    fn from(r: InstructionRecord) -> Self {
        Self {
            id: r.id,
            images: [r.pre_image_ref, r.post_image_ref],
            conversations: r.turns,
        }
    }
}

impl TryFrom<WireRecord> for InstructionRecord {
    type Error = Error;

    fn try_from(w: WireRecord) -> Result<Self> {
        let [pre, post] = w.images;
        let record = InstructionRecord {
            id: w.id,
            pre_image_ref: pre,
            post_image_ref: post,
            turns: w.conversations,
        };
        record.validate()?;
        Ok(record)
    }
}

/// Prefixes a question with the two image placeholders.
pub fn with_image_tokens(question: &str) -> String {
    format!("{PRE_IMAGE_TOKEN}\n{POST_IMAGE_TOKEN}\n{question}")
}

impl InstructionRecord {
    /// Builds a record from question/answer rounds, placing the image
    /// placeholders in front of the first question.
    pub fn from_rounds(id: impl Into<String>, images: [String; 2], rounds: &[(String, String)]) -> Result<Self> {
        let mut turns = Vec::with_capacity(rounds.len() * 2);
        for (i, (q, a)) in rounds.iter().enumerate() {
            let q = if i == 0 { with_image_tokens(q) } else { q.clone() };
            turns.push(ConversationTurn::human(q));
            turns.push(ConversationTurn::assistant(a.clone()));
        }
        let [pre, post] = images;
        let record = Self {
            id: id.into(),
            pre_image_ref: pre,
            post_image_ref: post,
            turns,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn rounds(&self) -> usize {
        self.turns.len() / 2
    }

    /// Checks the structural invariants of a training record.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::invalid(format!("record {:?}: {msg}", self.id)));
        if self.id.trim().is_empty() {
            return fail("empty id".into());
        }
        if self.pre_image_ref.trim().is_empty() || self.post_image_ref.trim().is_empty() {
            return fail("empty image reference".into());
        }
        if self.turns.len() < 2 || !self.turns.len().is_multiple_of(2) {
            return fail(format!(
                "expected an even number (>= 2) of turns, got {}",
                self.turns.len()
            ));
        }
        for (i, turn) in self.turns.iter().enumerate() {
            let expected = if i % 2 == 0 { Role::Human } else { Role::Assistant };
            if turn.role != expected {
                return fail(format!("turn {i} has role {:?}, expected {expected:?}", turn.role));
            }
            if turn.text.trim().is_empty() {
                return fail(format!("turn {i} is empty"));
            }
            let pre = turn.text.matches(PRE_IMAGE_TOKEN).count();
            let post = turn.text.matches(POST_IMAGE_TOKEN).count();
            if i == 0 {
                let ordered = turn.text.find(PRE_IMAGE_TOKEN) < turn.text.find(POST_IMAGE_TOKEN);
                if pre != 1 || post != 1 || !ordered {
                    return fail("first turn must hold one pre then one post image placeholder".into());
                }
            } else if pre + post > 0 {
                return fail(format!("turn {i} repeats an image placeholder"));
            }
        }
        Ok(())
    }
}
