//! The line-delimited instruction file consumed by trainers.

use std::io::{BufRead, Write};
use std::path::Path;

use super::record::InstructionRecord;
use crate::error::{Error, Result};
use crate::jsonl;

/// Writes records sorted by id, one JSON object per line. Nothing is
/// written if any record is invalid or an id repeats.
pub fn emit_instruction_file(records: &[InstructionRecord], writer: impl Write) -> Result<()> {
    let mut sorted: Vec<&InstructionRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    for record in &sorted {
        record.validate()?;
    }
    if let Some(w) = sorted.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::invalid(format!("duplicate record id {:?}", w[0].id)));
    }
    jsonl::write(writer, &sorted).map_err(|e| Error::io("instruction file", e))
}

pub fn write_instruction_file(records: &[InstructionRecord], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    emit_instruction_file(records, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Parses and validates an instruction file.
pub fn parse_instruction_file(reader: impl BufRead) -> Result<Vec<InstructionRecord>> {
    jsonl::read(reader, "instruction file")
}

pub fn read_instruction_file(path: &Path) -> Result<Vec<InstructionRecord>> {
    jsonl::read_path(path)
}
