use serde::{Deserialize, Serialize};

use super::{QaType, ATTRIBUTE_QUESTION, DESCRIPTIVE_QUESTION};
use crate::text::tokenize;

pub const ATTRIBUTE_LABELS: [&str; 5] = [
    "PROTEIN NAME:",
    "FUNCTION:",
    "SUBCELLULAR LOCATION:",
    "FAMILY:",
    "KEY SEQUENCE MOTIF:",
];

pub const DESCRIPTIVE_OPENERS: [&str; 5] = [
    "A short report on the protein with the given amino acid sequence highlights:",
    "A brief overview of the protein with the provided amino acid sequence is as follows:",
    "A concise description of the protein with the specified amino acid sequence includes:",
    "An outline of the key aspects of the protein with the corresponding amino acid sequence is as follows:",
    "A summary of the protein's main attributes with the input amino acid sequence reveals:",
];

const MAX_KNOWLEDGE_PAIRS: usize = 9;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct ParseError {
    pub message: String,
}

impl ParseError {
    pub fn new(message: impl Into<String>) -> Self {
        ParseError { message: message.into() }
    }
}

/// The content of one parsed pair, before accession and ids are attached.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaDraft {
    pub question: String,
    pub answer: String,
    pub explanation: Option<String>,
    pub verdict: Option<bool>,
}

impl QaDraft {
    fn plain(question: &str, answer: &str) -> Self {
        QaDraft {
            question: question.to_string(),
            answer: answer.to_string(),
            explanation: None,
            verdict: None,
        }
    }
}

fn clean_field(s: &str) -> &str {
    s.trim().trim_matches('*').trim().trim_end_matches(';').trim()
}

/// Stems may not give the answer away with a standalone true/false token.
pub(crate) fn check_stem(stem: &str) -> Result<(), ParseError> {
    if tokenize(stem).iter().any(|t| t == "true" || t == "false") {
        return Err(ParseError::new("stem must not contain the words True or False"));
    }
    Ok(())
}

fn parse_verdict(s: &str) -> Result<bool, ParseError> {
    let v = s.trim_matches(|c: char| c.is_whitespace() || matches!(c, '*' | '.' | ';' | '"'));
    match v.to_ascii_lowercase().as_str() {
        "true" | "t" => Ok(true),
        "false" | "f" => Ok(false),
        _ => Err(ParseError::new(format!("unrecognised verdict {v:?}"))),
    }
}

pub fn parse_truefalse(raw: &str) -> Result<QaDraft, ParseError> {
    let lower = raw.to_ascii_lowercase();
    let find = |label: &str, from: usize| lower[from..].find(label).map(|i| i + from);
    let s = find("stem:", 0).ok_or_else(|| ParseError::new("missing Stem:"))?;
    let a = find("answer:", s).ok_or_else(|| ParseError::new("missing Answer:"))?;
    let e = find("explanation:", a).ok_or_else(|| ParseError::new("missing Explanation:"))?;
    let stem = clean_field(&raw[s + "stem:".len()..a]);
    let verdict = parse_verdict(&raw[a + "answer:".len()..e])?;
    let explanation = raw[e + "explanation:".len()..].trim().trim_start_matches('*').trim();
    if stem.is_empty() {
        return Err(ParseError::new("empty stem"));
    }
    if explanation.is_empty() {
        return Err(ParseError::new("empty explanation"));
    }
    check_stem(stem)?;
    Ok(QaDraft {
        question: stem.to_string(),
        answer: if verdict { "True" } else { "False" }.to_string(),
        explanation: Some(explanation.to_string()),
        verdict: Some(verdict),
    })
}

/// Byte range of the body of `<tag>...</tag>`. The closing tag may be written
/// `</tag>`, `<\tag>` or `<\\tag>`; without one the body runs to `stop` or the end.
fn tagged_section(lower: &str, tag: &str, from: usize, stop: Option<&str>) -> Option<(usize, usize)> {
    let open = format!("<{tag}>");
    let start = lower[from..].find(&open)? + from + open.len();
    let closers = [format!("</{tag}>"), format!("<\\{tag}>"), format!("<\\\\{tag}>")];
    let end = closers
        .iter()
        .filter_map(|c| lower[start..].find(c.as_str()))
        .min()
        .or_else(|| stop.and_then(|s| lower[start..].find(s)))
        .map(|i| i + start)
        .unwrap_or(lower.len());
    Some((start, end))
}

/// Removes list markers such as `1.`, `2)`, `Q3:`, `A:` and bullets.
fn strip_numbering(line: &str) -> &str {
    let mut s = line.trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '-' | '*' | '•'));
    let bytes = s.as_bytes();
    let mut i = 0;
    if matches!(bytes.first(), Some(b'Q' | b'A' | b'q' | b'a')) {
        i = 1;
    }
    let digits_start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    let has_prefix = digits_start == 1;
    let has_digits = i > digits_start;
    if (has_prefix || has_digits) && i < bytes.len() && matches!(bytes[i], b'.' | b')' | b':') {
        // a bare letter needs ":" so answers like "A single ..." stay intact
        if has_digits || bytes[i] == b':' {
            s = &s[i + 1..];
        }
    }
    s.trim().trim_matches('*').trim()
}

fn list_items(body: &str) -> Vec<String> {
    body.lines()
        .map(strip_numbering)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn parse_knowledge(raw: &str) -> Result<Vec<QaDraft>, ParseError> {
    let lower = raw.to_ascii_lowercase();
    let (qs, qe) =
        tagged_section(&lower, "questions", 0, Some("<answers>")).ok_or_else(|| ParseError::new("missing <Questions> section"))?;
    let (as_, ae) = tagged_section(&lower, "answers", qe, None).ok_or_else(|| ParseError::new("missing <Answers> section"))?;
    let questions = list_items(&raw[qs..qe]);
    let answers = list_items(&raw[as_..ae]);
    if questions.is_empty() {
        return Err(ParseError::new("no questions"));
    }
    if questions.len() != answers.len() {
        return Err(ParseError::new(format!(
            "{} questions but {} answers",
            questions.len(),
            answers.len()
        )));
    }
    if questions.len() > MAX_KNOWLEDGE_PAIRS {
        return Err(ParseError::new(format!("{} pairs, at most {MAX_KNOWLEDGE_PAIRS} allowed", questions.len())));
    }
    Ok(questions
        .iter()
        .zip(&answers)
        .map(|(q, a)| QaDraft::plain(q, a))
        .collect())
}

pub fn parse_attribute(raw: &str) -> Result<QaDraft, ParseError> {
    let text = raw.trim();
    if text.is_empty() {
        return Err(ParseError::new("empty response"));
    }
    let norm = text.replace('*', "").to_uppercase();
    let missing: Vec<&str> = ATTRIBUTE_LABELS.iter().copied().filter(|l| !norm.contains(l)).collect();
    if !missing.is_empty() {
        return Err(ParseError::new(format!("missing field labels: {}", missing.join(", "))));
    }
    Ok(QaDraft::plain(ATTRIBUTE_QUESTION, text))
}

fn is_opener(opener: &str) -> bool {
    let lower = opener.to_lowercase();
    if DESCRIPTIVE_OPENERS.iter().any(|o| o.to_lowercase() == lower) {
        return true;
    }
    // synonymous variants are allowed by the template
    (lower.starts_with("a ") || lower.starts_with("an "))
        && lower.contains("protein")
        && (lower.contains("amino acid sequence") || lower.contains("amino-acid sequence"))
        && opener.chars().count() <= 200
}

pub fn parse_descriptive(raw: &str) -> Result<QaDraft, ParseError> {
    let text = raw.trim();
    if text.is_empty() {
        return Err(ParseError::new("empty response"));
    }
    let colon = text.find(':').ok_or_else(|| ParseError::new("missing opening sentence"))?;
    if !is_opener(&text[..=colon]) || text[colon + 1..].trim().is_empty() {
        return Err(ParseError::new("response does not open with a recognised description sentence"));
    }
    Ok(QaDraft::plain(DESCRIPTIVE_QUESTION, text))
}

pub fn parse_response(qa_type: QaType, raw: &str) -> Result<Vec<QaDraft>, ParseError> {
    match qa_type {
        QaType::Attribute => parse_attribute(raw).map(|d| vec![d]),
        QaType::Knowledge => parse_knowledge(raw),
        QaType::Descriptive => parse_descriptive(raw).map(|d| vec![d]),
        QaType::TrueFalse => parse_truefalse(raw).map(|d| vec![d]),
    }
}

/// Writes drafts back in the response format their parser expects.
pub fn render_raw(qa_type: QaType, drafts: &[QaDraft]) -> String {
    match qa_type {
        QaType::Attribute | QaType::Descriptive => drafts.first().map(|d| d.answer.clone()).unwrap_or_default(),
        QaType::TrueFalse => drafts
            .first()
            .map(|d| {
                format!(
                    "Stem: {}; Answer: {}; Explanation: {}",
                    d.question,
                    if d.verdict.unwrap_or(false) { "True" } else { "False" },
                    d.explanation.as_deref().unwrap_or("")
                )
            })
            .unwrap_or_default(),
        QaType::Knowledge => {
            let mut s = String::from("<Questions>\n");
            for (i, d) in drafts.iter().enumerate() {
                s.push_str(&format!("{}. {}\n", i + 1, d.question));
            }
            s.push_str("</Questions>\n<Answers>\n");
            for (i, d) in drafts.iter().enumerate() {
                s.push_str(&format!("{}. {}\n", i + 1, d.answer));
            }
            s.push_str("</Answers>");
            s
        }
    }
}
