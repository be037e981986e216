//! Turns curated annotations into question/answer exemplars by prompting a
//! chat model with fixed templates and validating what comes back.

mod generate;
mod parse;
mod synthetic;
mod templates;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use generate::{
    generate_corpus, read_checkpoint, Checkpoint, GenerateConfig, GenerationOutcome, GenerationReport, RejectRecord,
    TaskRecord,
};
pub use parse::{
    parse_attribute, parse_descriptive, parse_knowledge, parse_response, parse_truefalse, render_raw, ParseError,
    QaDraft, ATTRIBUTE_LABELS, DESCRIPTIVE_OPENERS,
};
pub use synthetic::{parse_annotation_block, synthetic_responder};
pub use templates::{annotation_block, PromptTemplates, SLOT};

pub const ATTRIBUTE_QUESTION: &str = "Summarize the key attributes of this protein.";
pub const DESCRIPTIVE_QUESTION: &str = "Provide a description of the protein with the given amino acid sequence.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaType {
    Attribute,
    Knowledge,
    Descriptive,
    TrueFalse,
}

impl QaType {
    pub const ALL: [QaType; 4] = [QaType::Attribute, QaType::Knowledge, QaType::Descriptive, QaType::TrueFalse];

    /// Short code used on the command line.
    pub fn code(self) -> &'static str {
        match self {
            QaType::Attribute => "attr",
            QaType::Knowledge => "know",
            QaType::Descriptive => "desc",
            QaType::TrueFalse => "tf",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QaType::Attribute => "attribute",
            QaType::Knowledge => "knowledge",
            QaType::Descriptive => "descriptive",
            QaType::TrueFalse => "true_false",
        }
    }

    /// Parses a comma-separated list such as `attr,know,desc,tf`.
    pub fn parse_list(s: &str) -> Result<Vec<QaType>, QaError> {
        let mut out: Vec<QaType> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()?;
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(QaError::UnknownType(s.to_string()));
        }
        Ok(out)
    }
}

impl fmt::Display for QaType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QaType {
    type Err = QaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        QaType::ALL
            .into_iter()
            .find(|t| t.code() == lower || t.as_str() == lower)
            .ok_or_else(|| QaError::UnknownType(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaInstance {
    pub id: String,
    pub accession: String,
    pub qa_type: QaType,
    pub question: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<bool>,
    pub source_model: String,
    pub sequence: String,
    /// Shared by the knowledge pairs that came from one generation call.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<String>,
}

impl QaInstance {
    pub fn draft(&self) -> QaDraft {
        QaDraft {
            question: self.question.clone(),
            answer: self.answer.clone(),
            explanation: self.explanation.clone(),
            verdict: self.verdict,
        }
    }

    /// Checks the per-type invariants.
    pub fn validate(&self) -> Result<(), ParseError> {
        if self.question.trim().is_empty() || self.answer.trim().is_empty() {
            return Err(ParseError::new("empty question or answer"));
        }
        if self.qa_type == QaType::TrueFalse {
            if self.verdict.is_none() || self.explanation.as_deref().is_none_or(|e| e.trim().is_empty()) {
                return Err(ParseError::new("true/false instance without verdict or explanation"));
            }
            parse::check_stem(&self.question)?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum QaError {
    #[error("unknown QA type {0:?} (expected attr, know, desc or tf)")]
    UnknownType(String),
    #[error("template {name}: {message}")]
    Template { name: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Jsonl(#[from] crate::jsonl::JsonlError),
    #[error("checkpoint line {line}: {message}")]
    Checkpoint { line: usize, message: String },
}
