//! Protein records and the UniProt TSV importer.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Read};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::jsonl::{self, JsonlError};

/// Top-level taxonomy class used for species quotas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
pub enum Superkingdom {
    Eukaryota,
    Bacteria,
    Archaea,
    Viruses,
    #[default]
    #[serde(other)]
    Unknown,
}

impl Superkingdom {
    pub const ALL: [Superkingdom; 5] = [
        Superkingdom::Eukaryota,
        Superkingdom::Bacteria,
        Superkingdom::Archaea,
        Superkingdom::Viruses,
        Superkingdom::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Superkingdom::Eukaryota => "Eukaryota",
            Superkingdom::Bacteria => "Bacteria",
            Superkingdom::Archaea => "Archaea",
            Superkingdom::Viruses => "Viruses",
            Superkingdom::Unknown => "Unknown",
        }
    }

    /// Picks the superkingdom out of a comma-separated lineage string such as
    /// `"Bacteria, Pseudomonadota, ..."` or `"Eukaryota (superkingdom), ..."`.
    pub fn from_lineage(lineage: &str) -> Superkingdom {
        for part in lineage.split(',') {
            let name = part.split('(').next().unwrap_or("").trim();
            if let Ok(k) = name.parse::<Superkingdom>() {
                if k != Superkingdom::Unknown {
                    return k;
                }
            }
        }
        Superkingdom::Unknown
    }
}

impl fmt::Display for Superkingdom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Superkingdom {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "Eukaryota" => Ok(Superkingdom::Eukaryota),
            "Bacteria" => Ok(Superkingdom::Bacteria),
            "Archaea" => Ok(Superkingdom::Archaea),
            "Viruses" => Ok(Superkingdom::Viruses),
            "Unknown" => Ok(Superkingdom::Unknown),
            _ => Err(()),
        }
    }
}

/// Free-text annotation fields carried into QA generation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motif: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProteinRecord {
    pub accession: String,
    pub sequence: String,
    #[serde(default)]
    pub go_terms: BTreeSet<String>,
    #[serde(default)]
    pub superkingdom: Superkingdom,
    #[serde(default)]
    pub annotation: Annotation,
}

#[derive(Debug, thiserror::Error)]
pub enum ProteinError {
    #[error("{accession}: empty sequence")]
    EmptySequence { accession: String },
    #[error("{accession}: invalid residue {residue:?} at position {position}")]
    InvalidResidue {
        accession: String,
        residue: char,
        position: usize,
    },
    #[error("record with empty accession")]
    EmptyAccession,
    #[error("duplicate accession {0}")]
    DuplicateAccession(String),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("tsv: {0}")]
    Tsv(#[from] csv::Error),
    #[error("tsv header lacks a required column: {0}")]
    MissingColumn(&'static str),
}

/// The 20 standard residues plus the ambiguity and rare codes B, Z, X, U, O.
pub fn is_residue(c: char) -> bool {
    c.is_ascii_uppercase() && c != 'J'
}

impl ProteinRecord {
    pub fn validate(&self) -> Result<(), ProteinError> {
        if self.accession.trim().is_empty() {
            return Err(ProteinError::EmptyAccession);
        }
        if self.sequence.is_empty() {
            return Err(ProteinError::EmptySequence {
                accession: self.accession.clone(),
            });
        }
        if let Some((position, residue)) = self.sequence.chars().enumerate().find(|(_, c)| !is_residue(*c)) {
            return Err(ProteinError::InvalidResidue {
                accession: self.accession.clone(),
                residue,
                position,
            });
        }
        Ok(())
    }
}

/// Reads and validates a protein JSONL stream; accessions must be unique.
pub fn read_proteins<R: BufRead>(input: R) -> Result<Vec<ProteinRecord>, ProteinError> {
    let proteins: Vec<ProteinRecord> = jsonl::read_jsonl(input)?;
    let mut seen = HashSet::new();
    for p in &proteins {
        p.validate()?;
        if !seen.insert(p.accession.as_str()) {
            return Err(ProteinError::DuplicateAccession(p.accession.clone()));
        }
    }
    Ok(proteins)
}

pub fn read_proteins_file(path: &Path) -> Result<Vec<ProteinRecord>, ProteinError> {
    let f = std::fs::File::open(path)?;
    read_proteins(std::io::BufReader::new(f))
}

// ---------------------------------------------------------------------------
// UniProt TSV import

const COL_ENTRY: &[&str] = &["Entry", "Accession"];
const COL_SEQUENCE: &[&str] = &["Sequence"];
const COL_GO: &[&str] = &["Gene Ontology IDs", "Gene ontology IDs", "GO IDs"];
const COL_LINEAGE: &[&str] = &[
    "Taxonomic lineage",
    "Taxonomic lineage (SUPERKINGDOM)",
    "Taxonomic lineage (all)",
    "Lineage",
];
const COL_NAME: &[&str] = &["Protein names", "Protein name"];
const COL_FUNCTION: &[&str] = &["Function [CC]"];
const COL_LOCATION: &[&str] = &["Subcellular location [CC]"];
const COL_FAMILY: &[&str] = &["Protein families"];
const COL_SIMILARITY: &[&str] = &["Sequence similarities"];
const COL_MOTIF: &[&str] = &["Motif"];

fn find_col(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    headers
        .iter()
        .position(|h| names.iter().any(|n| h.trim().eq_ignore_ascii_case(n)))
}

/// Drops `{ECO:...}` evidence blocks and collapses whitespace.
fn strip_evidence(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut depth = 0usize;
    for c in text.chars() {
        match c {
            '{' => depth += 1,
            '}' => depth = depth.saturating_sub(1),
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    let collapsed = out.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.replace(" .", ".").replace(" ;", ";")
}

fn comment_field(raw: &str, prefix: &str, keep_period: bool) -> Option<String> {
    let raw = raw.trim();
    if raw.is_empty() {
        return None;
    }
    let body = raw.strip_prefix(prefix).unwrap_or(raw);
    let mut text = strip_evidence(body);
    if !keep_period {
        while text.ends_with('.') {
            text.pop();
        }
    }
    let text = text.trim().to_string();
    (!text.is_empty()).then_some(text)
}

fn motif_field(raw: &str) -> Option<String> {
    let notes: Vec<&str> = raw
        .split("/note=\"")
        .skip(1)
        .filter_map(|s| s.split('"').next())
        .filter(|s| !s.is_empty())
        .collect();
    if notes.is_empty() {
        let raw = raw.trim();
        (!raw.is_empty()).then(|| raw.to_string())
    } else {
        Some(notes.join("; "))
    }
}

/// Converts a tab-separated UniProt export into protein records.
///
/// Columns are located by their UniProt header names; `Entry` and `Sequence`
/// are required, everything else is optional.
pub fn import_uniprot_tsv<R: Read>(input: R) -> Result<Vec<ProteinRecord>, ProteinError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .flexible(true)
        .quoting(false)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let entry = find_col(&headers, COL_ENTRY).ok_or(ProteinError::MissingColumn("Entry"))?;
    let sequence = find_col(&headers, COL_SEQUENCE).ok_or(ProteinError::MissingColumn("Sequence"))?;
    let go = find_col(&headers, COL_GO);
    let lineage = find_col(&headers, COL_LINEAGE);
    let name = find_col(&headers, COL_NAME);
    let function = find_col(&headers, COL_FUNCTION);
    let location = find_col(&headers, COL_LOCATION);
    let family = find_col(&headers, COL_FAMILY);
    let similarity = find_col(&headers, COL_SIMILARITY);
    let motif = find_col(&headers, COL_MOTIF);

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for row in reader.records() {
        let row = row?;
        let get = |idx: Option<usize>| idx.and_then(|i| row.get(i)).unwrap_or("");
        let accession = get(Some(entry)).trim().to_string();
        let record = ProteinRecord {
            sequence: get(Some(sequence)).trim().to_ascii_uppercase(),
            go_terms: get(go)
                .split(';')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(String::from)
                .collect(),
            superkingdom: Superkingdom::from_lineage(get(lineage)),
            annotation: Annotation {
                name: {
                    let n = get(name).split(" (").next().unwrap_or("").trim();
                    (!n.is_empty()).then(|| n.to_string())
                },
                function: comment_field(get(function), "FUNCTION:", true),
                location: comment_field(get(location), "SUBCELLULAR LOCATION:", false),
                family: comment_field(get(family), "", false),
                similarity: comment_field(get(similarity), "SIMILARITY:", true),
                motif: motif_field(get(motif)),
            },
            accession,
        };
        record.validate()?;
        if !seen.insert(record.accession.clone()) {
            return Err(ProteinError::DuplicateAccession(record.accession));
        }
        out.push(record);
    }
    out.sort_by(|a, b| a.accession.cmp(&b.accession));
    Ok(out)
}
