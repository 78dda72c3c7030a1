use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub description: String,
    /// Conversation rendered with `Question:` / `Answer:` markers.
    pub conversation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub system_instructions: String,
    pub few_shot_exemplars: Vec<Exemplar>,
}

const SYSTEM_INSTRUCTIONS: &str = "\
You are an AI visual assistant looking at two co-registered satellite images \
of the same location, one captured before and one after a period of time. \
Instead of the images you receive a description of the changes between them, \
including the number of change regions. Write a multi-round conversation \
between a person asking about the changes and an assistant who answers as if \
it is looking at both images. Ask what changed, where it changed, what kind of \
land cover or structures are involved, and how many change regions there are. \
Only state facts supported by the description and never mention that a \
description was provided. Put every question on a new line starting with \
\"Question:\" and every answer on a new line starting with \"Answer:\". \
Write nothing else.";

impl Default for PromptTemplate {
    /// Stock instructions with two hand-written exemplars.
    fn default() -> Self {
        Self {
            system_instructions: SYSTEM_INSTRUCTIONS.to_owned(),
            few_shot_exemplars: vec![
                Exemplar {
                    description: "Several new buildings were constructed on the bare land. \
                        A road was built next to them. There are 4 change regions between the two images."
                        .into(),
                    conversation: "Question: What has changed between the two images?\n\
                        Answer: Several new buildings have been constructed on land that was bare before, and a road was built next to them.\n\
                        Question: How many change regions are there?\n\
                        Answer: There are 4 change regions between the two images.\n\
                        Question: What was the area like before the change?\n\
                        Answer: It was bare land without any buildings."
                        .into(),
                },
                Exemplar {
                    description: "The vegetation along the river was cleared. \
                        There is 1 change region between the two images."
                        .into(),
                    conversation: "Question: Describe the changes in the scene.\n\
                        Answer: The vegetation along the river has been cleared.\n\
                        Question: How many areas show changes?\n\
                        Answer: There is 1 change region between the two images."
                        .into(),
                },
            ],
        }
    }
}

/// Assembles the generation prompt: system instructions, exemplars in
/// order, then the target description and the generation directive.
pub fn build_prompt(description: &str, template: &PromptTemplate) -> Result<String> {
    let description = description.trim();
    if description.is_empty() {
        return Err(Error::invalid("cannot build a prompt for an empty description"));
    }
    let mut prompt = String::new();
    prompt.push_str(template.system_instructions.trim());
    prompt.push_str("\n\n");
    for (i, ex) in template.few_shot_exemplars.iter().enumerate() {
        prompt.push_str(&format!(
            "Example {}:\nChange description: {}\nConversation:\n{}\n\n",
            i + 1,
            ex.description.trim(),
            ex.conversation.trim()
        ));
    }
    prompt.push_str(&format!(
        "Change description: {description}\nWrite the conversation for this change description.\nConversation:\n"
    ));
    Ok(prompt)
}
