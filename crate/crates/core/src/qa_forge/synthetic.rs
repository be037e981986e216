//! Offline stand-in for the generation model: answers each template by
//! reading the annotation block back out of the prompt.

use std::collections::BTreeMap;

use super::parse::DESCRIPTIVE_OPENERS;
use super::QaType;
use crate::llm_gateway::{stable_hash, ChatRequest, Responder};

/// Reads the leading `Key: value` lines of a rendered prompt.
pub fn parse_annotation_block(prompt: &str) -> BTreeMap<String, String> {
    prompt
        .lines()
        .take_while(|l| !l.trim().is_empty())
        .filter_map(|l| l.split_once(": "))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

fn detect(prompt: &str) -> Option<QaType> {
    if prompt.contains("KEY SEQUENCE MOTIF:") {
        Some(QaType::Attribute)
    } else if prompt.contains("<Questions>") {
        Some(QaType::Knowledge)
    } else if prompt.contains("True/False") && prompt.contains("Stem:") {
        Some(QaType::TrueFalse)
    } else if prompt.contains("describe the given amino-acid") {
        Some(QaType::Descriptive)
    } else {
        None
    }
}

struct Fields(BTreeMap<String, String>);

impl Fields {
    fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str).filter(|v| *v != "N/A" && !v.is_empty())
    }

    fn or_na(&self, key: &str) -> &str {
        self.get(key).unwrap_or("N/A")
    }

    fn name(&self) -> &str {
        self.get("Protein name").unwrap_or("This protein")
    }
}

fn sentence(s: &str) -> String {
    let s = s.trim();
    if s.ends_with('.') {
        s.to_string()
    } else {
        format!("{s}.")
    }
}

fn attribute(f: &Fields) -> String {
    let mut extended = format!(
        "{} is a {} protein annotated with {}.",
        f.name(),
        f.or_na("Superkingdom"),
        f.get("GO terms").unwrap_or("no GO terms")
    );
    if let Some(sim) = f.get("Sequence similarity") {
        extended.push(' ');
        extended.push_str(&sentence(sim));
    }
    format!(
        "PROTEIN NAME: {}\nFUNCTION: {}\nSUBCELLULAR LOCATION: {}\nFAMILY: {}\nKEY SEQUENCE MOTIF: {}\n\nExtended Information: {extended}",
        f.or_na("Protein name"),
        f.or_na("Function"),
        f.or_na("Subcellular location"),
        f.or_na("Family"),
        f.or_na("Motif"),
    )
}

fn descriptive(f: &Fields) -> String {
    let opener = DESCRIPTIVE_OPENERS[(stable_hash(0, f.or_na("Entry")) % DESCRIPTIVE_OPENERS.len() as u64) as usize];
    let mut parts = vec![opener.to_string()];
    if let Some(func) = f.get("Function") {
        parts.push(sentence(func));
    }
    if let Some(loc) = f.get("Subcellular location") {
        parts.push(format!("It is located in the {}.", loc.to_lowercase()));
    }
    if let Some(sim) = f.get("Sequence similarity") {
        parts.push(sentence(sim));
    }
    if let Some(m) = f.get("Motif") {
        parts.push(format!("The sequence carries the {m} motif."));
    }
    if parts.len() == 1 {
        parts.push(format!("It is a {} protein without further annotation.", f.or_na("Superkingdom")));
    }
    parts.join(" ")
}

fn knowledge(f: &Fields) -> String {
    let name = f.name();
    let mut pairs: Vec<(String, String)> = Vec::new();
    if let Some(func) = f.get("Function") {
        pairs.push((format!("What is the function of {name}?"), sentence(func)));
    }
    if let Some(loc) = f.get("Subcellular location") {
        pairs.push((format!("Where is {name} located in the cell?"), sentence(loc)));
    }
    if let Some(fam) = f.get("Family") {
        pairs.push((format!("Which protein family does {name} belong to?"), format!("It belongs to the {fam}.")));
    }
    if let Some(m) = f.get("Motif") {
        pairs.push((format!("Which sequence motif is characteristic of {name}?"), format!("The {m} motif.")));
    }
    pairs.push((format!("In which superkingdom is {name} found?"), sentence(f.or_na("Superkingdom"))));
    let mut s = String::from("<Questions>\n");
    for (i, (q, _)) in pairs.iter().enumerate() {
        s.push_str(&format!("{}. {q}\n", i + 1));
    }
    s.push_str("<\\Questions>\n<Answers>\n");
    for (i, (_, a)) in pairs.iter().enumerate() {
        s.push_str(&format!("{}. {a}\n", i + 1));
    }
    s.push_str("<\\Answers>");
    s
}

fn true_false(f: &Fields) -> String {
    let name = f.name();
    let loc = f.get("Subcellular location").map(str::to_lowercase).unwrap_or_else(|| "cell".into());
    let func = f.get("Function").map(|s| s.trim_end_matches('.').to_string());
    let stem = match &func {
        Some(func) => format!("{name} acts in the {loc} where it is annotated as follows: {func}"),
        None => format!("{name} is a {} protein found in the {loc}", f.or_na("Superkingdom")),
    };
    format!(
        "Stem: {stem}; Answer: True; Explanation: The entry lists {} as the location and {} as the family.",
        f.or_na("Subcellular location"),
        f.or_na("Family")
    )
}

/// Responder that produces a well-formed reply for any of the four templates.
pub fn synthetic_responder() -> impl Responder {
    |req: &ChatRequest| {
        let prompt = req.last_user();
        let qa_type = detect(prompt)?;
        let f = Fields(parse_annotation_block(prompt));
        f.get("Entry")?;
        Some(match qa_type {
            QaType::Attribute => attribute(&f),
            QaType::Knowledge => knowledge(&f),
            QaType::Descriptive => descriptive(&f),
            QaType::TrueFalse => true_false(&f),
        })
    }
}
