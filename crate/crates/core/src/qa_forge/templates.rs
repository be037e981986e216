use std::path::Path;

use super::{QaError, QaType};
use crate::protein::ProteinRecord;

/// Interpolation marker; every template holds exactly one.
pub const SLOT: &str = "{{ANNOTATIONS}}";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    attribute: String,
    knowledge: String,
    descriptive: String,
    true_false: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates::builtin()
    }
}

fn check(name: &str, text: &str) -> Result<(), QaError> {
    let n = text.matches(SLOT).count();
    if n != 1 {
        return Err(QaError::Template {
            name: name.into(),
            message: format!("expected one {SLOT} slot, found {n}"),
        });
    }
    Ok(())
}

impl PromptTemplates {
    /// Templates compiled into the binary from `prompts/`.
    pub fn builtin() -> Self {
        PromptTemplates {
            attribute: include_str!("../../prompts/attribute.txt").to_string(),
            knowledge: include_str!("../../prompts/knowledge.txt").to_string(),
            descriptive: include_str!("../../prompts/descriptive.txt").to_string(),
            true_false: include_str!("../../prompts/true_false.txt").to_string(),
        }
    }

    /// Loads `<type>.txt` for every type from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, QaError> {
        let read = |t: QaType| -> Result<String, QaError> {
            let text = std::fs::read_to_string(dir.join(format!("{}.txt", t.as_str())))?;
            check(t.as_str(), &text)?;
            Ok(text)
        };
        Ok(PromptTemplates {
            attribute: read(QaType::Attribute)?,
            knowledge: read(QaType::Knowledge)?,
            descriptive: read(QaType::Descriptive)?,
            true_false: read(QaType::TrueFalse)?,
        })
    }

    pub fn get(&self, qa_type: QaType) -> &str {
        match qa_type {
            QaType::Attribute => &self.attribute,
            QaType::Knowledge => &self.knowledge,
            QaType::Descriptive => &self.descriptive,
            QaType::TrueFalse => &self.true_false,
        }
    }

    pub fn render(&self, protein: &ProteinRecord, qa_type: QaType) -> String {
        self.get(qa_type).replacen(SLOT, annotation_block(protein).trim_end(), 1)
    }
}

/// `Key: value` lines describing one entry; absent fields read `N/A`.
pub fn annotation_block(p: &ProteinRecord) -> String {
    let a = &p.annotation;
    let field = |v: &Option<String>| v.as_deref().map(str::trim).filter(|s| !s.is_empty()).unwrap_or("N/A").to_string();
    let go = if p.go_terms.is_empty() {
        "N/A".to_string()
    } else {
        p.go_terms.iter().cloned().collect::<Vec<_>>().join(", ")
    };
    let mut out = String::new();
    for (k, v) in [
        ("Entry", p.accession.clone()),
        ("Protein name", field(&a.name)),
        ("Superkingdom", p.superkingdom.as_str().to_string()),
        ("Function", field(&a.function)),
        ("Subcellular location", field(&a.location)),
        ("Family", field(&a.family)),
        ("Sequence similarity", field(&a.similarity)),
        ("Motif", field(&a.motif)),
        ("GO terms", go),
        ("Sequence", p.sequence.clone()),
    ] {
        out.push_str(k);
        out.push_str(": ");
        out.push_str(&v);
        out.push('\n');
    }
    out
}
