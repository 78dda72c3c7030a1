//! Fixed phrasings shared by description composition, instruction
//! generation and answer parsing.

use crate::mask::CountBucket;

pub const PRE_IMAGE_TOKEN: &str = "<image-pre>";
pub const POST_IMAGE_TOKEN: &str = "<image-post>";

pub const DESCRIBE_QUESTION: &str = "Describe the changes between the two images.";

pub const COUNT_QUESTION: &str = "How many change regions are there in the two images? \
Choose from the given ranges: less than or equal to five, between six and ten, \
between eleven and twenty, more than twenty.";

/// Sentence stating the number of change regions.
pub fn count_sentence(count: usize) -> String {
    if count == 1 {
        "There is 1 change region between the two images.".to_owned()
    } else {
        format!("There are {count} change regions between the two images.")
    }
}

/// Recovers the count from a sentence produced by [`count_sentence`]
/// anywhere in `text`.
pub fn parse_count_sentence(text: &str) -> Option<usize> {
    const SINGULAR: &str = "there is 1 change region between the two images";
    const PREFIX: &str = "there are ";
    const SUFFIX: &str = " change regions between the two images";

    let lower = text.to_lowercase();
    let mut from = 0;
    while let Some(pos) = lower[from..].find(PREFIX) {
        let start = from + pos + PREFIX.len();
        let digits: String = lower[start..].chars().take_while(char::is_ascii_digit).collect();
        if !digits.is_empty() && lower[start + digits.len()..].starts_with(SUFFIX) {
            return digits.parse().ok();
        }
        from = start;
    }
    lower.contains(SINGULAR).then_some(1)
}

/// Answer to the counting question for a bucket.
pub fn count_answer(bucket: CountBucket) -> String {
    format!("The number of change regions is {}.", bucket.phrase())
}
