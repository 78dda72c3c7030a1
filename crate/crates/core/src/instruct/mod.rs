//! Instruction-conversation generation from change descriptions.

pub mod file;
pub mod generate;
pub mod llm;
pub mod prompt;
pub mod record;

pub use file::{emit_instruction_file, parse_instruction_file, read_instruction_file, write_instruction_file};
pub use generate::{
    generate_all, image_refs, parse_qa_response, template_fallback, DescriptionItem, GenerationOutcome, GenerationSkip,
    Generator, RetryPolicy, SkipReason,
};
pub use llm::{HttpLlmClient, LlmClient, LlmConfig, LlmError};
pub use prompt::{build_prompt, Exemplar, PromptTemplate};
pub use record::{ConversationTurn, InstructionRecord, Role};
