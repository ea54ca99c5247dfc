//! Instruction-tuning export: one (system, user, target) example per training record.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, FoldAssignment, Label, LicenseRecord};
use crate::prompts::{render, TemplatePack};

/// One line of an instruction export file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionExample {
    pub system: String,
    pub user: String,
    pub target: String,
    pub license_id: String,
}

/// Canonical verdict sentence for a ground-truth label.
pub fn label_phrase(label: Label) -> Option<&'static str> {
    match label {
        Label::AllowsCommercial => Some("This license allows commercial use."),
        Label::DeniesCommercial => Some("This license does not allow commercial use."),
        Label::Unclear => Some("It is unclear if the license allows commercial use."),
        Label::Unlabeled => None,
    }
}

/// Expected answer for a record: the label sentence, then the expert rationale and any listed
/// rights and obligations. Also used as the reference text for semantic similarity.
pub fn target_completion(record: &LicenseRecord) -> Result<String, CorpusError> {
    let phrase = label_phrase(record.label).ok_or_else(|| CorpusError::Unlabeled(record.id.clone()))?;
    let mut target = phrase.to_string();
    if let Some(rationale) = record.rationale.as_deref().filter(|r| !r.trim().is_empty()) {
        target.push_str("\n\n");
        target.push_str(rationale.trim());
    }
    if let Some(items) = record.rights_obligations.as_ref().filter(|v| !v.is_empty()) {
        target.push_str("\n\nRights and obligations:");
        for item in items {
            target.push_str("\n- ");
            target.push_str(item);
        }
    }
    Ok(target)
}

/// Writes the training split (every assigned record outside `held_out_fold`) as JSON lines, in
/// corpus order. Returns the number of examples written.
pub fn export_instruction_dataset<W: Write>(
    corpus: &Corpus,
    folds: &FoldAssignment,
    held_out_fold: usize,
    pack: &TemplatePack,
    system_id: &str,
    user_id: &str,
    mut out: W,
) -> Result<usize, CorpusError> {
    if held_out_fold >= folds.k {
        return Err(CorpusError::InvalidArgument(format!(
            "held-out fold {held_out_fold} outside [0, {})",
            folds.k
        )));
    }
    let mut lines = Vec::new();
    for record in corpus {
        match folds.fold_of(&record.id) {
            Some(f) if f != held_out_fold => {}
            _ => continue,
        }
        let target = target_completion(record)?;
        let prompt = render(pack, system_id, user_id, record)?;
        let example = InstructionExample {
            system: prompt.system_text,
            user: prompt.user_text,
            target,
            license_id: record.id.clone(),
        };
        lines.push(serde_json::to_string(&example).expect("example serializes"));
    }
    let write_err = |e: std::io::Error| CorpusError::Write(e.to_string());
    for line in &lines {
        out.write_all(line.as_bytes()).map_err(write_err)?;
        out.write_all(b"\n").map_err(write_err)?;
    }
    out.flush().map_err(write_err)?;
    Ok(lines.len())
}
