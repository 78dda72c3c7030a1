use anyhow::Result;
use changekit_core::dataset::{ChangeDescriptionRecord, RecordStatus};
use changekit_core::instruct::{
    emit_instruction_file, generate_all, template_fallback, DescriptionItem, GenerationSkip, Generator, HttpLlmClient,
    PromptTemplate, SkipReason,
};
use changekit_core::jsonl;
use serde::Serialize;

use super::Session;
use crate::cli::GenArgs;

#[derive(Debug, Serialize)]
struct GenReport {
    mode: &'static str,
    inputs: usize,
    records: usize,
    skipped: Vec<GenerationSkip>,
}

fn invalid(id: &str, error: String) -> GenerationSkip {
    GenerationSkip {
        id: id.to_owned(),
        reason: SkipReason::Invalid { error },
    }
}

pub fn run(session: &Session, args: &GenArgs) -> Result<()> {
    let input: Vec<ChangeDescriptionRecord> = jsonl::read_path(&args.records)?;
    let inputs = input.len();
    let mut skipped = Vec::new();
    let mut usable = Vec::with_capacity(inputs);
    for record in input {
        if record.status != RecordStatus::Verified && !args.allow_drafts {
            skipped.push(invalid(&record.pair_id, "record is not verified".into()));
        } else if let Err(e) = record.validate() {
            skipped.push(invalid(&record.pair_id, e.to_string()));
        } else {
            usable.push(record);
        }
    }

    let mut records = Vec::with_capacity(usable.len());
    let mode = if args.offline {
        for record in &usable {
            match template_fallback(record) {
                Ok(r) => records.push(r),
                Err(e) => skipped.push(invalid(&record.pair_id, e.to_string())),
            }
        }
        "template"
    } else {
        let mut items = Vec::with_capacity(usable.len());
        for record in &usable {
            match DescriptionItem::from_record(record) {
                Ok(item) => items.push(item),
                Err(e) => skipped.push(invalid(&record.pair_id, e.to_string())),
            }
        }
        let client = HttpLlmClient::from_env(session.config.llm.clone())?;
        let generator = Generator::new(&client, PromptTemplate::default(), session.config.generation.retry());
        let parallelism = args.parallelism.unwrap_or(session.config.generation.parallelism);
        let outcome = generate_all(&generator, &items, parallelism);
        records = outcome.records;
        skipped.extend(outcome.skips);
        "llm"
    };
    skipped.sort_by(|a, b| a.id.cmp(&b.id));

    let mut file = Vec::new();
    emit_instruction_file(&records, &mut file)?;
    println!(
        "{} conversations, {} skipped, from {inputs} records",
        records.len(),
        skipped.len()
    );
    session.out.write_bytes("instructions.jsonl", &file)?;
    session.out.write_json(
        "gen_report.json",
        &GenReport {
            mode,
            inputs,
            records: records.len(),
            skipped,
        },
    )?;
    Ok(())
}
