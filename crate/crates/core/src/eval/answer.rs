//! Free-text counting answers to buckets.

use serde::{Deserialize, Serialize};

use crate::mask::{bucketize, CountBucket};
use crate::template::parse_count_sentence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "bucket", rename_all = "snake_case")]
pub enum CountOutcome {
    Bucket(CountBucket),
    /// No range phrase and no numeral, or range phrases naming different
    /// buckets.
    Unparseable,
}

impl CountOutcome {
    pub fn bucket(self) -> Option<CountBucket> {
        match self {
            CountOutcome::Bucket(b) => Some(b),
            CountOutcome::Unparseable => None,
        }
    }
}

const RANGE_PHRASES: &[(&str, CountBucket)] = &[
    ("less than or equal to five", CountBucket::Le5),
    ("less than or equal to 5", CountBucket::Le5),
    ("between six and ten", CountBucket::B6To10),
    ("between 6 and 10", CountBucket::B6To10),
    ("between eleven and twenty", CountBucket::B11To20),
    ("between 11 and 20", CountBucket::B11To20),
    ("more than twenty", CountBucket::Gt20),
    ("more than 20", CountBucket::Gt20),
];

const NUMBER_WORDS: [&str; 21] = [
    "zero",
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
    "twenty",
];

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Buckets named by range phrases in `lower`, scanning left to right and
/// taking the longest phrase that starts at each word boundary.
fn range_buckets(lower: &str) -> Vec<CountBucket> {
    let mut found = Vec::new();
    let mut prev: Option<char> = None;
    let mut i = 0;
    while i < lower.len() {
        let c = lower[i..].chars().next().expect("index is on a char boundary");
        if prev.is_none_or(|p| !is_word_char(p)) {
            let rest = &lower[i..];
            let best = RANGE_PHRASES
                .iter()
                .filter(|(phrase, _)| rest.starts_with(phrase) && !rest[phrase.len()..].starts_with(is_word_char))
                .max_by_key(|(phrase, _)| phrase.len());
            if let Some((phrase, bucket)) = best {
                if !found.contains(bucket) {
                    found.push(*bucket);
                }
                prev = phrase.chars().last();
                i += phrase.len();
                continue;
            }
        }
        prev = Some(c);
        i += c.len_utf8();
    }
    found
}

fn word_value(word: &str) -> Option<usize> {
    if word.chars().all(|c| c.is_ascii_digit()) {
        return word.parse().ok();
    }
    NUMBER_WORDS.iter().position(|w| *w == word)
}

/// First integer in `lower`, as digits or a number word. "twenty" followed
/// by a unit word ("twenty-one", "twenty three") reads as one number.
fn first_numeral(lower: &str) -> Option<usize> {
    let words: Vec<&str> = lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect();
    for (i, word) in words.iter().enumerate() {
        if let Some(n) = word_value(word) {
            if *word == "twenty" {
                if let Some(unit) = words
                    .get(i + 1)
                    .and_then(|w| NUMBER_WORDS[1..10].iter().position(|u| u == w))
                {
                    return Some(21 + unit);
                }
            }
            return Some(n);
        }
    }
    None
}

/// Reads a counting answer.
///
/// Order of precedence: the four range phrases (case-insensitive, longest
/// match first); then the count sentence used in composed descriptions; then
/// the first numeral. Phrases naming two different buckets are unparseable
/// rather than a guess.
pub fn parse_count_answer(text: &str) -> CountOutcome {
    let lower = text.to_lowercase();
    match range_buckets(&lower).as_slice() {
        [one] => return CountOutcome::Bucket(*one),
        [] => {}
        _ => return CountOutcome::Unparseable,
    }
    if let Some(n) = parse_count_sentence(&lower) {
        return CountOutcome::Bucket(bucketize(n));
    }
    match first_numeral(&lower) {
        Some(n) => CountOutcome::Bucket(bucketize(n)),
        None => CountOutcome::Unparseable,
    }
}
